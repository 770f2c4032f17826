from __future__ import annotations

import pytest

from smproof.certio import dump_homoclinic, dump_separatrix
from smproof.config import ProofConfig
from smproof.homoclinic import prove_homoclinic
from smproof.sepvalue import compute_separatrix


@pytest.fixture(scope="session")
def proof_config() -> ProofConfig:
    return ProofConfig()


@pytest.fixture(scope="session")
def homoclinic(proof_config):
    """The default homoclinic certificate, computed once per session."""
    return prove_homoclinic(proof_config.bracket(), proof_config.homoclinic_settings())


@pytest.fixture(scope="session")
def homoclinic_doc(homoclinic):
    return dump_homoclinic(homoclinic)


@pytest.fixture(scope="session")
def separatrix(homoclinic, proof_config):
    return compute_separatrix(homoclinic, proof_config.sep_settings())


@pytest.fixture(scope="session")
def separatrix_doc(separatrix, homoclinic_doc):
    return dump_separatrix(separatrix, homoclinic_doc)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
