"""Relational schema model with picklists.

Schemas are read from Spider-style ``tables.json`` documents.  Picklists (the
distinct value set of every field) come from a sidecar JSON file mapping
``"table.column"`` to a list of values, or from a SQLite database laid out as
``<schema_dir>/database/<db_id>/<db_id>.sqlite``.  When both exist the sidecar
wins.
"""

from __future__ import annotations

import json
import sqlite3
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

DATA_TYPES = ("number", "text", "time", "boolean", "others")
DEFAULT_FK_EXCLUDE = frozenset({"name", "id", "code"})


class SchemaError(ValueError):
    """Malformed schema document or dangling reference."""


@dataclass(frozen=True)
class Field:
    name: str
    table: int
    data_type: str = "text"
    is_primary_key: bool = False
    in_foreign_pair: bool = False
    picklist: tuple[str, ...] = ()

    @property
    def type_index(self) -> int:
        return DATA_TYPES.index(self.data_type)


@dataclass(frozen=True)
class Table:
    name: str
    fields: tuple[int, ...]


@dataclass(frozen=True)
class ForeignKeyPair:
    source: int
    target: int


@dataclass(frozen=True)
class Schema:
    db_id: str
    tables: tuple[Table, ...]
    fields: tuple[Field, ...]
    foreign_keys: tuple[ForeignKeyPair, ...] = ()
    _table_index: dict = field(default=None, compare=False, repr=False, hash=False)
    _field_index: dict = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        _validate(self)
        tindex = {t.name.lower(): i for i, t in enumerate(self.tables)}
        findex: dict[tuple[int, str], int] = {}
        for i, f in enumerate(self.fields):
            findex[(f.table, f.name.lower())] = i
        object.__setattr__(self, "_table_index", tindex)
        object.__setattr__(self, "_field_index", findex)

    def table_id(self, name: str) -> int | None:
        return self._table_index.get(name.strip().lower())

    def field_id(self, table: int, name: str) -> int | None:
        return self._field_index.get((table, name.strip().lower()))

    def fields_named(self, name: str) -> list[int]:
        key = name.strip().lower()
        return [i for i, f in enumerate(self.fields) if f.name.lower() == key]

    def qualified_name(self, fid: int) -> str:
        f = self.fields[fid]
        return f"{self.tables[f.table].name}.{f.name}"

    def picklist(self, fid: int) -> list[str]:
        if not 0 <= fid < len(self.fields):
            raise IndexError(f"invalid field id {fid} for schema {self.db_id!r}")
        return list(self.fields[fid].picklist)

    def with_picklists(self, values: dict[int, Iterable]) -> Schema:
        fields = list(self.fields)
        for fid, vals in values.items():
            fields[fid] = replace(fields[fid], picklist=_dedupe(vals))
        return replace(self, fields=tuple(fields))


def _dedupe(values: Iterable) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for v in values:
        if v is None:
            continue
        text = v if isinstance(v, str) else _render_value(v)
        seen.setdefault(text, None)
    return tuple(seen)


def _render_value(v) -> str:
    if isinstance(v, bytes):
        return v.decode("utf-8", errors="replace")
    return str(v)


def _validate(s: Schema) -> None:
    if not s.tables:
        raise SchemaError(f"{s.db_id}: schema has no tables")
    for ti, t in enumerate(s.tables):
        if not t.name:
            raise SchemaError(f"{s.db_id}: table {ti} has an empty name")
        if not t.fields:
            raise SchemaError(f"{s.db_id}: table {t.name!r} has no fields")
        for fid in t.fields:
            if not 0 <= fid < len(s.fields) or s.fields[fid].table != ti:
                raise SchemaError(f"{s.db_id}: table {t.name!r} lists foreign field {fid}")
    for fid, f in enumerate(s.fields):
        if not f.name:
            raise SchemaError(f"{s.db_id}: field {fid} has an empty name")
        if f.data_type not in DATA_TYPES:
            raise SchemaError(f"{s.db_id}: field {f.name!r} has unknown type {f.data_type!r}")
        if len(set(f.picklist)) != len(f.picklist):
            raise SchemaError(f"{s.db_id}: field {f.name!r} has duplicate picklist values")
    in_pair = set()
    for k, fk in enumerate(s.foreign_keys):
        for end in (fk.source, fk.target):
            if not 0 <= end < len(s.fields):
                raise SchemaError(f"{s.db_id}: dangling key reference in foreign_keys[{k}]: field {end}")
        if fk.source == fk.target or s.fields[fk.source].table == s.fields[fk.target].table:
            raise SchemaError(f"{s.db_id}: foreign_keys[{k}] must join two different tables")
        in_pair.update((fk.source, fk.target))
    for fid, f in enumerate(s.fields):
        if f.in_foreign_pair != (fid in in_pair):
            raise SchemaError(f"{s.db_id}: in_foreign_pair flag of {f.name!r} disagrees with foreign_keys")


def build_schema(db_id: str, tables: dict[str, list[tuple]], foreign_keys=(), primary_keys=()) -> Schema:
    """Convenience constructor used by tests and the toy corpus.

    ``tables`` maps a table name to ``(field_name, data_type[, picklist])``
    tuples; keys are given as ``"table.field"`` strings.
    """
    tlist, flist = [], []
    lookup = {}
    for tname, cols in tables.items():
        ids = []
        for col in cols:
            fname, dtype = col[0], col[1]
            pick = tuple(col[2]) if len(col) > 2 else ()
            lookup[f"{tname}.{fname}".lower()] = len(flist)
            ids.append(len(flist))
            flist.append(Field(fname, len(tlist), dtype, picklist=_dedupe(pick)))
        tlist.append(Table(tname, tuple(ids)))
    for key in primary_keys:
        fid = lookup[key.lower()]
        flist[fid] = replace(flist[fid], is_primary_key=True)
    fks = tuple(ForeignKeyPair(lookup[a.lower()], lookup[b.lower()]) for a, b in foreign_keys)
    return _assemble(db_id, tlist, flist, fks)


def _assemble(db_id, tables, fields, fks) -> Schema:
    in_pair = {e for fk in fks for e in (fk.source, fk.target)}
    fields = [replace(f, in_foreign_pair=i in in_pair) for i, f in enumerate(fields)]
    return Schema(db_id, tuple(tables), tuple(fields), tuple(fks))


def schema_from_spider(doc: dict, where: str = "<document>") -> Schema:
    try:
        db_id = doc["db_id"]
        tnames = doc["table_names_original"]
        cols = doc["column_names_original"]
        types = doc.get("column_types", ["text"] * len(cols))
        pks = doc.get("primary_keys", [])
        fk_raw = doc.get("foreign_keys", [])
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{where}: missing key {exc}") from None
    if len(types) != len(cols):
        raise SchemaError(f"{where}: column_types and column_names_original differ in length")

    # spider column index -> our field id (the leading "*" pseudo-column is skipped)
    colmap: dict[int, int] = {}
    fields: list[Field] = []
    per_table: list[list[int]] = [[] for _ in tnames]
    for ci, (ti, cname) in enumerate(cols):
        if ti < 0:
            continue
        if ti >= len(tnames):
            raise SchemaError(f"{where}: column {ci} ({cname!r}) references missing table {ti}")
        dtype = types[ci] if types[ci] in DATA_TYPES else "others"
        colmap[ci] = len(fields)
        per_table[ti].append(len(fields))
        fields.append(Field(cname, ti, dtype))

    flat_pks = []
    for pk in pks:
        flat_pks.extend(pk if isinstance(pk, list) else [pk])
    for ci in flat_pks:
        if ci not in colmap:
            raise SchemaError(f"{where}: dangling key reference in primary_keys: column {ci}")
        fields[colmap[ci]] = replace(fields[colmap[ci]], is_primary_key=True)

    fks = []
    for k, pair in enumerate(fk_raw):
        a, b = pair
        if a not in colmap or b not in colmap:
            raise SchemaError(f"{where}: dangling key reference in foreign_keys[{k}]: {pair}")
        fks.append(ForeignKeyPair(colmap[a], colmap[b]))
    tables = [Table(name, tuple(ids)) for name, ids in zip(tnames, per_table)]
    return _assemble(db_id, tables, fields, tuple(fks))


def _read_json(path: Path):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read schema file ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON ({exc.msg})") from exc


def load_schemas(path: str | Path, with_picklists: bool = True) -> dict[str, Schema]:
    """Load every schema in a tables.json file (a list or a single object)."""
    path = Path(path)
    doc = _read_json(path)
    docs = doc if isinstance(doc, list) else [doc]
    out = {}
    for i, d in enumerate(docs):
        s = schema_from_spider(d, where=f"{path}[{i}]")
        if with_picklists:
            s = attach_picklists(s, path.parent)
        out[s.db_id] = s
    return out


def load_schema(path: str | Path, db_id: str | None = None) -> Schema:
    schemas = load_schemas(path)
    if db_id is None:
        if len(schemas) != 1:
            raise SchemaError(f"{path}: holds {len(schemas)} schemas, pass db_id")
        return next(iter(schemas.values()))
    try:
        return schemas[db_id]
    except KeyError:
        raise SchemaError(f"{path}: no schema with db_id {db_id!r}") from None


def values_path(schema_dir: Path, db_id: str) -> Path:
    return Path(schema_dir) / f"{db_id}.values.json"


def sqlite_path(schema_dir: Path, db_id: str) -> Path:
    return Path(schema_dir) / "database" / db_id / f"{db_id}.sqlite"


def attach_picklists(s: Schema, schema_dir: str | Path) -> Schema:
    vpath = values_path(Path(schema_dir), s.db_id)
    if vpath.exists():
        return s.with_picklists(read_values_file(s, vpath))
    dbpath = sqlite_path(Path(schema_dir), s.db_id)
    if dbpath.exists():
        return s.with_picklists(read_sqlite_values(s, dbpath))
    return s


def read_values_file(s: Schema, path: Path) -> dict[int, list]:
    doc = _read_json(path)
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: expected an object mapping 'table.column' to value lists")
    out = {}
    for key, vals in doc.items():
        tname, _, cname = key.partition(".")
        tid = s.table_id(tname)
        fid = s.field_id(tid, cname) if tid is not None else None
        if fid is None:
            raise SchemaError(f"{path}: dangling key reference {key!r}")
        out[fid] = vals
    return out


def read_sqlite_values(s: Schema, path: Path) -> dict[int, list]:
    out = {}
    con = sqlite3.connect(f"file:{path}?mode=ro", uri=True)
    con.text_factory = lambda b: b.decode("utf-8", errors="replace")
    try:
        for fid, f in enumerate(s.fields):
            t = s.tables[f.table].name
            try:
                rows = con.execute(f'SELECT DISTINCT "{f.name}" FROM "{t}"').fetchall()
            except sqlite3.Error:
                continue
            out[fid] = [r[0] for r in rows]
    finally:
        con.close()
    return out


def augment_foreign_keys(s: Schema, exclude: Iterable[str] = DEFAULT_FK_EXCLUDE) -> Schema:
    """Add pairs between same-named fields of different tables when one is a primary key.

    Each derived pair points from the non-key field to the key; when both are
    keys, from the later table to the earlier one.
    """
    excluded = {e.strip().lower() for e in exclude}
    pairs = list(s.foreign_keys)
    known = {(p.source, p.target) for p in pairs} | {(p.target, p.source) for p in pairs}
    for a, fa in enumerate(s.fields):
        for b, fb in enumerate(s.fields):
            if b <= a or fa.table == fb.table:
                continue
            key = fa.name.strip().lower()
            if key != fb.name.strip().lower() or key in excluded:
                continue
            if not (fa.is_primary_key or fb.is_primary_key):
                continue
            if (a, b) in known:
                continue
            src, dst = (b, a) if fa.is_primary_key else (a, b)
            pairs.append(ForeignKeyPair(src, dst))
            known.update({(a, b), (b, a)})
    if len(pairs) == len(s.foreign_keys):
        return s
    return _assemble(s.db_id, s.tables, s.fields, tuple(pairs))


def schema_to_spider(s: Schema) -> dict:
    """Inverse of :func:`schema_from_spider` (field k maps to column k + 1)."""
    return {
        "db_id": s.db_id,
        "table_names_original": [t.name for t in s.tables],
        "table_names": [t.name.replace("_", " ").lower() for t in s.tables],
        "column_names_original": [[-1, "*"]] + [[f.table, f.name] for f in s.fields],
        "column_names": [[-1, "*"]] + [[f.table, f.name.replace("_", " ").lower()] for f in s.fields],
        "column_types": ["text"] + [f.data_type for f in s.fields],
        "primary_keys": [i + 1 for i, f in enumerate(s.fields) if f.is_primary_key],
        "foreign_keys": [[p.source + 1, p.target + 1] for p in s.foreign_keys],
    }
