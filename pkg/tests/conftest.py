import json

import pytest
import torch

from anchorsql import toy
from anchorsql.schema import load_schemas

torch.set_num_threads(1)


def read_jsonl(path):
    lines = path.read_text().splitlines()
    header = json.loads(lines[0])
    assert header["format"].startswith("anchorsql-")
    return [json.loads(line) for line in lines[1:]]


@pytest.fixture(scope="session")
def bundle():
    return toy.bundled_dir()


@pytest.fixture(scope="session")
def schemas(bundle):
    return load_schemas(bundle / "tables.json")


@pytest.fixture(scope="session")
def queries(bundle):
    return read_jsonl(bundle / "queries.jsonl")


@pytest.fixture(scope="session")
def train_records(bundle):
    return read_jsonl(bundle / "train.jsonl")


@pytest.fixture(scope="session")
def heldout_records(bundle):
    return read_jsonl(bundle / "heldout.jsonl")


@pytest.fixture(scope="session")
def anchor_records(bundle):
    return read_jsonl(bundle / "anchors.jsonl")


@pytest.fixture(scope="session")
def real_estate(schemas):
    return schemas["real_estate"]


@pytest.fixture(scope="session")
def pets(schemas):
    return schemas["pets"]


# -- acceptance report ----------------------------------------------------------

ACCEPTANCE: list[tuple[str, bool, str]] = []


def record(criterion: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE.append((criterion, bool(ok), detail))
    print(f"{'PASS' if ok else 'FAIL'}  {criterion}: {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {criterion}: {detail}")
