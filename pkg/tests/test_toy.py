import sqlite3

from anchorsql import toy


def test_bundle_matches_generator(bundle):
    files = toy.bundle_files()
    on_disk = {p.name for p in bundle.iterdir() if p.is_file()}
    assert on_disk == set(files)
    for name, text in files.items():
        assert (bundle / name).read_text() == text, name


def test_corpus_shape(train_records, heldout_records, queries, anchor_records):
    assert len(train_records) == 300
    assert {r["db_id"] for r in train_records} == set(toy.TRAIN_DBS)
    assert len(heldout_records) == 50 and {r["db_id"] for r in heldout_records} == {"shop"}
    assert len(queries) >= 50
    assert len(anchor_records) == 50


def test_generation_is_seeded():
    assert toy.train_examples(7) == toy.train_examples(7)
    assert toy.train_examples(7) != toy.train_examples(8)


def test_database_matches_picklists(tmp_path, schemas):
    path = toy.build_database("library", tmp_path / "library.sqlite")
    s = schemas["library"]
    con = sqlite3.connect(path)
    try:
        for i, f in enumerate(s.fields):
            t = s.tables[f.table].name
            rows = {str(v) for (v,) in con.execute(f"SELECT DISTINCT {f.name} FROM {t}")}
            assert rows == set(f.picklist), s.qualified_name(i)
    finally:
        con.close()
