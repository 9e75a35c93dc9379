"""One test per acceptance criterion; each prints its check lines in the summary."""

import pytest

from ergolab.verify import SUITES

CRITERIA = [
    ("c01_mixing_exactness", "mixing"),
    ("c02_rigidity_witnesses", "rigidity"),
    ("c03_weak_limit_detector", "weaklimit"),
    ("c04_spectral_classifier", "spectral"),
    ("c05_sequence_entropy", "entropy"),
    ("c06_independence_defect_and_hp_blowup", "defect"),
    ("c07_cocycle_laws", "cocycle"),
    ("c08_rwm_functional", "rwm"),
    ("c09_triple_correlations", "triple"),
    ("c10_determinism", "determinism"),
]


@pytest.mark.parametrize("criterion,suite", CRITERIA, ids=[c for c, _ in CRITERIA])
def test_criterion(criterion, suite, acceptance_log):
    checks = SUITES[suite][0]()
    assert checks
    for c in checks:
        acceptance_log.append(f"{criterion}: {c.line()}")
    failed = [c.line() for c in checks if not c.passed]
    assert not failed, "\n".join(failed)
