"""Deterministic toy text-to-SQL corpus: schemas, rows, picklists and templated examples.

Five schemas form the training split and one unseen schema the held-out
split.  A few small extra schemas carry the appendix SQL examples and
hand-written anchor-matching cases.  ``write_bundle`` regenerates every file
under ``anchorsql/data/toy``; the bundled files are its output for the
default seed.
"""

from __future__ import annotations

import json
import random
import sqlite3
from dataclasses import dataclass
from pathlib import Path

from .hybrid import split_name
from .schema import Schema, build_schema, schema_to_spider

FORMAT_VERSION = 1
TRAIN_DBS = ("concert_hall", "library", "company", "school", "zoo")
HELDOUT_DBS = ("shop",)
TRAIN_PER_DB = 60
HELDOUT_SIZE = 50
SEED = 20201105

# table -> (singular, plural, [(column, type, pool or None)], rows)
# pools name the value lists below; "pk" marks the primary key, "fk:<table>" a reference
_POOLS = {
    "person": ["Alice", "Bruno", "Chen", "Dana", "Emeka", "Farah", "Goran", "Hana", "Ivan", "Julia", "Kofi", "Lena"],
    "country": ["France", "Japan", "Brazil", "Canada", "Kenya", "Norway"],
    "city": ["Boston", "Paris", "Lagos", "Denver", "Osaka", "Lima"],
    "venue": ["Royal Hall", "Arena Nord", "Blue Dome", "Old Theatre"],
    "concert": ["Spring Gala", "Night Lights", "Summer Waves", "Autumn Echo", "Winter Song", "Moon Dance", "Sun Fest", "River Jam"],
    "genre": ["Mystery", "Poetry", "History", "Fantasy", "Romance"],
    "title": ["Silent Road", "Glass River", "Iron Garden", "Paper Moon", "Red Harbor", "Quiet Storm", "Lost Valley", "Bright Field", "Cold Star", "Green Door"],
    "dept": ["Sales", "Research", "Finance", "Support"],
    "major": ["Biology", "Physics", "Economics", "Music", "Chemistry"],
    "course": ["Algebra", "Genetics", "Optics", "Harmony", "Statistics", "Ecology"],
    "grade": ["A", "B", "C"],
    "species": ["Lion", "Zebra", "Penguin", "Otter", "Panda"],
    "animal": ["Leo", "Stripes", "Pingu", "Bubbles", "Bao", "Rocky", "Luna", "Max", "Nala", "Kiko"],
    "shift": ["Morning", "Evening", "Night"],
    "product": ["Desk Lamp", "Tea Kettle", "Wool Scarf", "Road Bike", "Camp Stove", "Rain Boots", "Yoga Mat", "Wall Clock", "Coffee Mill", "Sun Hat"],
    "category": ["Kitchen", "Outdoor", "Apparel", "Home"],
    "supplier": ["Northwind", "Acme Goods", "Blue Ocean", "Sunrise Trade", "Peak Supply"],
}

_DOMAINS: dict[str, dict] = {
    "concert_hall": {
        "singer": ("singer", "singers", [("singer_id", "number", "pk"), ("name", "text", "person"), ("country", "text", "country"), ("age", "number", (18, 70))], 10),
        "concert": ("concert", "concerts", [("concert_id", "number", "pk"), ("concert_name", "text", "concert"), ("venue", "text", "venue"), ("year", "number", (2001, 2020)), ("singer_id", "number", "fk:singer")], 8),
    },
    "library": {
        "author": ("author", "authors", [("author_id", "number", "pk"), ("name", "text", "person"), ("nationality", "text", "country"), ("birth_year", "number", (1940, 1995))], 8),
        "book": ("book", "books", [("book_id", "number", "pk"), ("title", "text", "title"), ("genre", "text", "genre"), ("pages", "number", (90, 900)), ("author_id", "number", "fk:author")], 10),
    },
    "company": {
        "department": ("department", "departments", [("department_id", "number", "pk"), ("dept_name", "text", "dept"), ("budget", "number", (100, 900))], 4),
        "employee": ("employee", "employees", [("employee_id", "number", "pk"), ("name", "text", "person"), ("city", "text", "city"), ("salary", "number", (30, 150)), ("department_id", "number", "fk:department")], 12),
    },
    "school": {
        "student": ("student", "students", [("student_id", "number", "pk"), ("name", "text", "person"), ("major", "text", "major"), ("age", "number", (17, 30))], 10),
        "course": ("course", "courses", [("course_id", "number", "pk"), ("course_title", "text", "course"), ("credits", "number", (1, 6))], 6),
        "enrollment": ("enrollment", "enrollments", [("enrollment_id", "number", "pk"), ("grade", "text", "grade"), ("student_id", "number", "fk:student"), ("course_id", "number", "fk:course")], 12),
    },
    "zoo": {
        "keeper": ("keeper", "keepers", [("keeper_id", "number", "pk"), ("name", "text", "person"), ("shift", "text", "shift"), ("salary", "number", (20, 60))], 5),
        "animal": ("animal", "animals", [("animal_id", "number", "pk"), ("name", "text", "animal"), ("species", "text", "species"), ("weight", "number", (5, 400)), ("keeper_id", "number", "fk:keeper")], 10),
    },
    "shop": {
        "supplier": ("supplier", "suppliers", [("supplier_id", "number", "pk"), ("supplier_name", "text", "supplier"), ("country", "text", "country"), ("rating", "number", (1, 10))], 5),
        "product": ("product", "products", [("product_id", "number", "pk"), ("product_name", "text", "product"), ("category", "text", "category"), ("price", "number", (5, 300)), ("supplier_id", "number", "fk:supplier")], 10),
    },
}

# small schemas for the appendix execution-order examples and anchor cases
_EXTRA_SCHEMAS = {
    "flight": ({"routes": [("rid", "number"), ("dst_apid", "number"), ("src_apid", "number")],
                "airports": [("apid", "number"), ("name", "text"), ("country", "text")]},
               [("routes.dst_apid", "airports.apid"), ("routes.src_apid", "airports.apid")], ["routes.rid", "airports.apid"]),
    "academic": ({"publication_keyword": [("kid", "number"), ("pid", "number")],
                  "keyword": [("kid", "number"), ("keyword", "text")],
                  "publication": [("pid", "number"), ("jid", "number"), ("title", "text")],
                  "journal": [("jid", "number"), ("name", "text")]},
                 [("publication_keyword.kid", "keyword.kid"), ("publication_keyword.pid", "publication.pid"), ("publication.jid", "journal.jid")],
                 ["keyword.kid", "publication.pid", "journal.jid"]),
    "college": ({"college": [("cname", "text"), ("state", "text"), ("enr", "number")]}, [], ["college.cname"]),
    "voter": ({"STUDENT": [("StuID", "number"), ("LName", "text"), ("Fname", "text"), ("Advisor", "number")],
               "VOTING_RECORD": [("StuID", "number"), ("Election_Cycle", "text"), ("PRESIDENT_Vote", "number")]},
              [("VOTING_RECORD.StuID", "STUDENT.StuID"), ("VOTING_RECORD.PRESIDENT_Vote", "STUDENT.StuID")], ["STUDENT.StuID"]),
    "real_estate": ({"Ref_Property_Types": [("property_type_code", "text", ["Apartment", "Field", "House", "Shop", "Other"]),
                                            ("property_type_description", "text", ["Residential unit", "Farmland", "Dwelling", "Storefront", "Misc"])],
                     "Properties": [("property_id", "number"), ("property_type_code", "text", ["Apartment", "Field", "House", "Shop", "Other"]),
                                    ("property_name", "text", ["park", "cole", "prax", "avalon", "vogue"]), ("room_count", "number", ["1", "2", "3", "5", "7", "8", "9"])]},
                    [("Properties.property_type_code", "Ref_Property_Types.property_type_code")], ["Ref_Property_Types.property_type_code", "Properties.property_id"]),
    "pets": ({"student": [("stuid", "number"), ("lname", "text", ["Smith", "Kim", "Jones"]), ("city_code", "text", ["BAL", "HKG", "WAS"])],
              "pets": [("petid", "number"), ("pettype", "text", ["cat", "dog"]), ("pet_age", "number", ["1", "2", "3"])],
              "has_pet": [("stuid", "number"), ("petid", "number")],
              "airports": [("name", "text", ["Los Angeles International Airport", "Boston Logan"]), ("category", "text", ["regional", "international"])]},
             [("has_pet.stuid", "student.stuid"), ("has_pet.petid", "pets.petid")], ["student.stuid", "pets.petid"]),
}

APPENDIX = [
    ("flight",
     "SELECT rid FROM routes WHERE dst_apid IN (SELECT apid FROM airports WHERE country = 'United States') AND src_apid IN (SELECT apid FROM airports WHERE country  =  'United States')",
     "FROM routes WHERE dst_apid IN (FROM airports WHERE country = 'United States' SELECT apid) AND src_apid IN (FROM airports WHERE country = 'United States' SELECT apid) SELECT rid"),
    ("academic",
     'SELECT t3.name FROM publication_keyword AS t4 JOIN keyword AS t1 ON t4.kid = t1.kid JOIN publication AS t2 ON t2.pid = t4.pid JOIN journal AS t3 ON t2.jid = t3.jid WHERE t1.keyword = "Relational Database" GROUP BY t3.name HAVING COUNT(DISTINCT t2.title) = 60',
     'FROM publication_keyword AS t4 JOIN keyword AS t1 ON t4.kid = t1.kid JOIN publication AS t2 ON t2.pid = t4.pid JOIN journal AS t3 ON t2.jid = t3.jid WHERE t1.keyword = "Relational Database" GROUP BY t3.name HAVING COUNT(DISTINCT t2.title) = 60 SELECT t3.name'),
    ("college",
     "SELECT COUNT(DISTINCT state) FROM college WHERE enr  <  (SELECT AVG(enr) FROM college)",
     "FROM college WHERE enr < (FROM college SELECT AVG(enr)) SELECT COUNT(DISTINCT state)"),
    ("voter",
     'SELECT DISTINCT T1.LName FROM STUDENT AS T1 JOIN VOTING_RECORD AS T2 ON T1.StuID  =  PRESIDENT_Vote EXCEPT SELECT DISTINCT LName FROM STUDENT WHERE Advisor  =  "2192"',
     "FROM STUDENT AS T1 JOIN VOTING_RECORD AS T2 ON T1.StuID = PRESIDENT_Vote SELECT DISTINCT T1.LName EXCEPT FROM STUDENT WHERE Advisor = 2192 SELECT DISTINCT LName"),
]

# the out-of-scope sequence of the appendix counterexample (canonical spacing)
SCOPE_COUNTEREXAMPLE = (
    "voter",
    "FROM STUDENT JOIN VOTING_RECORD ON STUDENT.StuID = VOTING_RECORD.PRESIDENT_Vote SELECT DISTINCT STUDENT.LName "
    "EXCEPT FROM STUDENT WHERE STUDENT.Advisor = 2192 SELECT DISTINCT VOTING_RECORD.PRESIDENT_Vote",
)

_ANCHOR_CASES = [
    ("pets", "how many students keep cats as pets?"),
    ("pets", "show the category page of each airport"),
    ("pets", "Which students from WAS have a dog?"),
    ("pets", "list airports in los angeles"),
    ("real_estate", "What are the names of properties that are either houses or apartments with more than 1 room?"),
]


@dataclass(frozen=True)
class Example:
    db_id: str
    question: str
    sql: str
    template: str

    def to_json(self) -> dict:
        return {"db_id": self.db_id, "question": self.question, "query": self.sql, "template": self.template}


# -- schemas and rows -----------------------------------------------------

def _rows(db_id: str, rng: random.Random) -> dict[str, list[tuple]]:
    out: dict[str, list[tuple]] = {}
    for tname, (_, _, cols, count) in _DOMAINS[db_id].items():
        rows = []
        for i in range(count):
            row = []
            for cname, ctype, spec in cols:
                if spec == "pk":
                    row.append(i + 1)
                elif isinstance(spec, str) and spec.startswith("fk:"):
                    row.append(rng.randint(1, len(out[spec[3:]])))
                elif isinstance(spec, tuple):
                    row.append(rng.randint(*spec))
                elif cname in ("name", "title", "concert_name", "product_name", "supplier_name", "course_title", "dept_name"):
                    pool = _POOLS[spec]
                    row.append(pool[i % len(pool)])
                else:
                    row.append(rng.choice(_POOLS[spec]))
            rows.append(tuple(row))
        out[tname] = rows
    return out


def domain_rows(db_id: str, seed: int = SEED) -> dict[str, list[tuple]]:
    return _rows(db_id, random.Random(f"{seed}:{db_id}"))


def domain_schema(db_id: str, seed: int = SEED) -> Schema:
    rows = domain_rows(db_id, seed)
    tables, fks, pks = {}, [], []
    for tname, (_, _, cols, _) in _DOMAINS[db_id].items():
        spec_cols = []
        for j, (cname, ctype, spec) in enumerate(cols):
            values = sorted({str(r[j]) for r in rows[tname]}, key=lambda v: (len(v), v))
            spec_cols.append((cname, ctype, values))
            if spec == "pk":
                pks.append(f"{tname}.{cname}")
            elif isinstance(spec, str) and spec.startswith("fk:"):
                parent = spec[3:]
                fks.append((f"{tname}.{cname}", f"{parent}.{_DOMAINS[db_id][parent][2][0][0]}"))
        tables[tname] = spec_cols
    return build_schema(db_id, tables, fks, pks)


def extra_schema(db_id: str) -> Schema:
    tables, fks, pks = _EXTRA_SCHEMAS[db_id]
    return build_schema(db_id, tables, fks, pks)


def all_schemas(seed: int = SEED) -> dict[str, Schema]:
    out = {db: domain_schema(db, seed) for db in TRAIN_DBS + HELDOUT_DBS}
    out.update({db: extra_schema(db) for db in _EXTRA_SCHEMAS})
    return out


def build_database(db_id: str, path: str | Path, seed: int = SEED) -> Path:
    """Write a SQLite file holding the toy rows of ``db_id``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.exists():
        path.unlink()
    rows = domain_rows(db_id, seed)
    con = sqlite3.connect(path)
    try:
        for tname, (_, _, cols, _) in _DOMAINS[db_id].items():
            decl = ", ".join(f"{c} {'INTEGER' if t == 'number' else 'TEXT'}" for c, t, _ in cols)
            con.execute(f"CREATE TABLE {tname} ({decl})")
            con.executemany(f"INSERT INTO {tname} VALUES ({', '.join('?' * len(cols))})", rows[tname])
        con.commit()
    finally:
        con.close()
    return path


# -- templates ------------------------------------------------------------

def _phrase(col: str) -> str:
    return " ".join(split_name(col))


@dataclass(frozen=True)
class _TableInfo:
    name: str
    singular: str
    plural: str
    label: str
    pk: str
    categorical: tuple[str, ...]
    numeric: tuple[str, ...]
    values: dict


def _table_infos(db_id: str, seed: int) -> dict[str, _TableInfo]:
    rows = domain_rows(db_id, seed)
    infos = {}
    for tname, (sing, plur, cols, _) in _DOMAINS[db_id].items():
        text_cols = [c for c, t, _ in cols if t == "text"]
        label = text_cols[0] if len(text_cols) > 1 or tname != "enrollment" else None
        numeric = tuple(c for c, t, s in cols if t == "number" and isinstance(s, tuple))
        categorical = tuple(c for c in text_cols if c != label)
        values = {c: sorted({r[j] for r in rows[tname]}, key=str) for j, (c, _, _) in enumerate(cols)}
        infos[tname] = _TableInfo(tname, sing, plur, label, cols[0][0], categorical, numeric, values)
    return infos


def _foreign_pairs(db_id: str) -> list[tuple[str, str, str, str]]:
    """(child table, fk column, parent table, parent key) pairs."""
    out = []
    for tname, (_, _, cols, _) in _DOMAINS[db_id].items():
        for cname, _, spec in cols:
            if isinstance(spec, str) and spec.startswith("fk:"):
                parent = spec[3:]
                out.append((tname, cname, parent, _DOMAINS[db_id][parent][2][0][0]))
    return out


_AGGS = (("average", "avg"), ("maximum", "max"), ("minimum", "min"), ("total", "sum"))


def _candidates(db_id: str, seed: int) -> dict[str, list[tuple[str, str]]]:
    infos = _table_infos(db_id, seed)
    c: dict[str, list[tuple[str, str]]] = {}

    def add(template, question, sql):
        c.setdefault(template, []).append((question, sql))

    for t in infos.values():
        n, tp, ts = t.name, t.plural, t.singular
        add("count", f"How many {tp} are there?", f"SELECT count(*) FROM {n}")
        add("count", f"Count the number of {tp}.", f"SELECT count(*) FROM {n}")
        cols = ([t.label] if t.label else []) + list(t.categorical) + list(t.numeric)
        for f in cols:
            add("project", f"List the {_phrase(f)} of all {tp}.", f"SELECT {f} FROM {n}")
            add("project", f"What are the {_phrase(f)} of the {tp}?", f"SELECT {f} FROM {n}")
        for i, f in enumerate(cols):
            for g in cols[i + 1 :]:
                add("project2", f"Show the {_phrase(f)} and {_phrase(g)} of each {ts}.", f"SELECT {f} , {g} FROM {n}")
        for num in t.numeric:
            for word, fn in _AGGS:
                add("aggregate", f"What is the {word} {_phrase(num)} of all {tp}?", f"SELECT {fn}({num}) FROM {n}")
                add("aggregate", f"Find the {word} {_phrase(num)} among {tp}.", f"SELECT {fn}({num}) FROM {n}")
        if t.label:
            lab = _phrase(t.label)
            for num in t.numeric:
                vals = t.values[num]
                for v in (vals[len(vals) // 3], vals[len(vals) // 2]):
                    add("numeric_filter", f"Which {tp} have a {_phrase(num)} greater than {v}? Give their {lab}.",
                        f"SELECT {t.label} FROM {n} WHERE {num} > {v}")
                    add("numeric_filter", f"Show the {lab} of {tp} whose {_phrase(num)} is less than {v}.",
                        f"SELECT {t.label} FROM {n} WHERE {num} < {v}")
                add("order", f"List the {lab} of {tp} in descending order of {_phrase(num)}.", f"SELECT {t.label} FROM {n} ORDER BY {num} DESC")
                add("order", f"Show the {lab} of all {tp} sorted by {_phrase(num)}.", f"SELECT {t.label} FROM {n} ORDER BY {num} ASC")
                add("top", f"Which {ts} has the highest {_phrase(num)}? Give the {lab}.", f"SELECT {t.label} FROM {n} ORDER BY {num} DESC LIMIT 1")
                add("top", f"What is the {lab} of the {ts} with the lowest {_phrase(num)}?", f"SELECT {t.label} FROM {n} ORDER BY {num} ASC LIMIT 1")
                add("nested", f"Which {tp} have a {_phrase(num)} above the average? List their {lab}.",
                    f"SELECT {t.label} FROM {n} WHERE {num} > (SELECT avg({num}) FROM {n})")
            for cat in t.categorical:
                for v in t.values[cat]:
                    add("value_filter", f"List the {lab} of {tp} with {v}.", f'SELECT {t.label} FROM {n} WHERE {cat} = "{v}"')
                    add("value_filter", f"Which {tp} are linked to {v}? Show their {lab}.", f'SELECT {t.label} FROM {n} WHERE {cat} = "{v}"')
        for cat in t.categorical:
            for v in t.values[cat]:
                add("value_count", f"How many {tp} have {v}?", f'SELECT count(*) FROM {n} WHERE {cat} = "{v}"')
            add("group", f"How many {tp} are there for each {_phrase(cat)}?", f"SELECT {cat} , count(*) FROM {n} GROUP BY {cat}")
            add("group", f"Show each {_phrase(cat)} and the number of {tp}.", f"SELECT {cat} , count(*) FROM {n} GROUP BY {cat}")
            add("distinct", f"List the distinct {_phrase(cat)} of all {tp}.", f"SELECT DISTINCT {cat} FROM {n}")
            add("distinct", f"What are the different {_phrase(cat)} of {tp}?", f"SELECT DISTINCT {cat} FROM {n}")
            for k in (1, 2):
                add("having", f"Which {_phrase(cat)} have more than {k} {tp}?", f"SELECT {cat} FROM {n} GROUP BY {cat} HAVING count(*) > {k}")
    for child, fk, parent, pk in _foreign_pairs(db_id):
        ci, pi = infos[child], infos[parent]
        if not (ci.label and pi.label):
            continue
        add("join", f"Show the {_phrase(ci.label)} of each {ci.singular} and the {_phrase(pi.label)} of its {pi.singular}.",
            f"SELECT T1.{ci.label} , T2.{pi.label} FROM {child} AS T1 JOIN {parent} AS T2 ON T1.{fk} = T2.{pk}")
        for cat in pi.categorical:
            for v in pi.values[cat]:
                add("join_value", f"List the {_phrase(ci.label)} of {ci.plural} whose {pi.singular} has {v}.",
                    f'SELECT T1.{ci.label} FROM {child} AS T1 JOIN {parent} AS T2 ON T1.{fk} = T2.{pk} WHERE T2.{cat} = "{v}"')
        for v in pi.values[pi.label]:
            add("join_value", f"Count the {ci.plural} of the {pi.singular} {v}.",
                f'SELECT count(*) FROM {child} AS T1 JOIN {parent} AS T2 ON T1.{fk} = T2.{pk} WHERE T2.{pi.label} = "{v}"')
    return c


def generate(db_id: str, size: int, seed: int = SEED) -> list[Example]:
    """``size`` distinct examples cycling through the templates in a fixed order."""
    rng = random.Random(f"{seed}:examples:{db_id}")
    cands = _candidates(db_id, seed)
    for lst in cands.values():
        rng.shuffle(lst)
    names = sorted(cands)
    out, seen = [], set()
    cursor = {k: 0 for k in names}
    i = 0
    while len(out) < size:
        name = names[i % len(names)]
        i += 1
        lst = cands[name]
        while cursor[name] < len(lst) and lst[cursor[name]] in seen:
            cursor[name] += 1
        if cursor[name] >= len(lst):
            if all(cursor[k] >= len(cands[k]) for k in names):
                break
            continue
        q, sql = lst[cursor[name]]
        cursor[name] += 1
        seen.add((q, sql))
        out.append(Example(db_id, q, sql, name))
    return out


def train_examples(seed: int = SEED) -> list[Example]:
    return [ex for db in TRAIN_DBS for ex in generate(db, TRAIN_PER_DB, seed)]


def heldout_examples(seed: int = SEED) -> list[Example]:
    return generate(HELDOUT_DBS[0], HELDOUT_SIZE, seed)


def anchor_cases(seed: int = SEED) -> list[tuple[str, str]]:
    """50 (db_id, question) pairs for the anchor matcher micro-corpus."""
    rng = random.Random(f"{seed}:anchors")
    pool = [(e.db_id, e.question) for e in train_examples(seed) + heldout_examples(seed)]
    valued = [p for p in pool if any(ch.isupper() for ch in p[1][1:])]
    rng.shuffle(valued)
    return list(_ANCHOR_CASES) + valued[: 50 - len(_ANCHOR_CASES)]


# -- bundle ---------------------------------------------------------------

def _header(kind: str) -> str:
    return json.dumps({"format": f"anchorsql-{kind}", "version": FORMAT_VERSION}, sort_keys=True)


def _jsonl(kind: str, records) -> str:
    return "\n".join([_header(kind)] + [json.dumps(r, sort_keys=True) for r in records]) + "\n"


def bundle_files(seed: int = SEED) -> dict[str, str]:
    schemas = all_schemas(seed)
    files = {"tables.json": json.dumps([schema_to_spider(s) for s in schemas.values()], indent=1, sort_keys=True) + "\n"}
    for db_id, s in schemas.items():
        values = {s.qualified_name(i): list(f.picklist) for i, f in enumerate(s.fields) if f.picklist}
        if values:
            files[f"{db_id}.values.json"] = json.dumps(values, indent=1, sort_keys=True) + "\n"
    train, held = train_examples(seed), heldout_examples(seed)
    files["train.jsonl"] = _jsonl("examples", [e.to_json() for e in train])
    files["heldout.jsonl"] = _jsonl("examples", [e.to_json() for e in held])
    queries = [{"db_id": db, "query": w, "exec": e} for db, w, e in APPENDIX]
    seen = set()
    for e in train + held:
        if (e.db_id, e.sql) not in seen:
            seen.add((e.db_id, e.sql))
            queries.append({"db_id": e.db_id, "query": e.sql})
    files["queries.jsonl"] = _jsonl("queries", queries)
    files["anchors.jsonl"] = _jsonl("anchor-cases", [{"db_id": d, "question": q} for d, q in anchor_cases(seed)])
    return files


def write_bundle(directory: str | Path, seed: int = SEED) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in bundle_files(seed).items():
        p = directory / name
        p.write_text(text)
        written.append(p)
    return written


def bundled_dir() -> Path:
    return Path(__file__).parent / "data" / "toy"
