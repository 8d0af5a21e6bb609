import json
import sys

import pytest

from dinn.cli import main
from dinn.data import air_quality_profile, make_surrogate_csv


def pytest_terminal_summary(terminalreporter):
    lines = getattr(sys.modules.get("test_acceptance"), "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def surrogate_csv(tmp_path_factory):
    """Three months of synthetic readings in the UCI file layout."""
    path = tmp_path_factory.mktemp("data") / "air.csv"
    return make_surrogate_csv(path, seed=3, hours=24 * 92)


@pytest.fixture(scope="session")
def profile_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("profile") / "profile.json"
    path.write_text(json.dumps(air_quality_profile().to_dict()))
    return path


@pytest.fixture(scope="session")
def prepared(tmp_path_factory, surrogate_csv, profile_path):
    out = tmp_path_factory.mktemp("prep")
    assert main(["prepare", "--csv", str(surrogate_csv), "--profile", str(profile_path),
                 "--out", str(out), "--seed", "0"]) == 0
    return out
