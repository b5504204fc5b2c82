import json
from importlib.resources import files
from pathlib import Path

import pytest

from lexsolve import load_sample_kb
from lexsolve.case_model import parse_case
from lexsolve.cli import load_probes
from lexsolve.kb import parse_kb, validate_kb

FIXTURES = Path(__file__).parent / "fixtures"
DATA = files("lexsolve").joinpath("data")


def data_path(name: str) -> str:
    return str(DATA.joinpath(name))


def sample_records() -> list[dict]:
    text = DATA.joinpath("sample_cases.jsonl").read_text(encoding="utf-8")
    return [json.loads(ln) for ln in text.splitlines() if ln.strip()]


def validated_sample_kb():
    kb = load_sample_kb()
    report = validate_kb(kb, load_probes(data_path("probes.jsonl")))
    assert report.ok, [f.to_dict() for f in report.errors]
    return kb


# Article 234 of the sample KB follows this shape; kept standalone so the
# severity tests do not depend on the rest of the sample KB.
SEVERITY_KB = """
exclusive MentalState: Intentional, Negligent, Knowing, Unknown;
exclusive Severity: Minor, Serious, EspeciallySerious;

article 234 {
  guard: Actor = person and exists act (Act = assault) and exists result (Result = bodily_harm);
  defaults { cruel_means = false; weapon_used = false; compensation_paid = false; }
  clause 1 {
    guard: MentalState = Intentional and exists result (Causes and Severity = Minor) and not cruel_means;
    penalty [0, 36];
  }
  clause 2 {
    guard: MentalState = Intentional and (exists result (Causes and Severity = Serious) or cruel_means);
    penalty (36, 120];
    aggravate 12 when: weapon_used;
    mitigate 24 when: compensation_paid;
  }
}
"""


@pytest.fixture(scope="session")
def sample_kb():
    return validated_sample_kb()


@pytest.fixture(scope="session")
def sample_cases():
    return {r["case_id"]: parse_case(r, "LeCaRDv2") for r in sample_records()}


@pytest.fixture
def severity_kb():
    kb = parse_kb(SEVERITY_KB)
    assert validate_kb(kb).ok
    return kb


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES
