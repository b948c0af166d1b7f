from __future__ import annotations

import numpy as np
import pytest

from termbridge.synthetic import make_rotation_pair

NOTES = """History of Present Illness:
65 yo male with chest pain radiating to the left arm. He was given aspirin.
Brief Hospital Course:
Pt admitted to cardiology. Troponin was elevated and he was started on heparin.
Discharge Instructions:
You had a heart attack. Take your aspirin every day.
Followup Instructions:
See your heart doctor in two weeks.
<<<NOTE>>>
HPI: 72 yo female with shortness of breath.
Hospital Course:
Treated with diuretics for heart failure.
Discharge Instructions:
Weigh yourself every morning. Call your doctor if your weight goes up.
"""


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption("--runslow", action="store_true", default=False, help="run slow acceptance checks")


def pytest_collection_modifyitems(config: pytest.Config, items: list) -> None:
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def notes_file(tmp_path):
    path = tmp_path / "notes.txt"
    path.write_text(NOTES, encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def rotation_pair():
    return make_rotation_pair(n_words=300, d=20, noise_sigma=0.0, anchor_fraction=0.2, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
