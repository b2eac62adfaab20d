import pytest

from sma_lda.experiments import TABLE2_DESIGN
from sma_lda.regression import QUANTILE_LABELS, lc_quantile_given_bic
from sma_lda.severity import SeverityModel, alpha_star_analytic, lambda_from_el
from sma_lda.sma_core import COLLECTION_FLOOR, compute_bic


@pytest.fixture(scope="session")
def table2_inputs():
    """(bi, mu, sigma, label, lambda) for every row of the BI comparison design."""
    out = []
    for bi, pairs in TABLE2_DESIGN.items():
        bic = compute_bic(bi)
        for mu, sigma in pairs:
            sev = SeverityModel(mu, sigma, COLLECTION_FLOOR)
            a = alpha_star_analytic(sev)
            for label in QUANTILE_LABELS:
                lc = lc_quantile_given_bic(bic, label)
                out.append((bi, mu, sigma, label, lambda_from_el(sev, lc / a)))
    return out


@pytest.fixture(scope="session")
def table2_rows():
    from sma_lda.experiments import table2_study

    return table2_study()


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def verdict(request):
    """Record one pass/fail line for an acceptance criterion, then assert it."""
    lines = request.config.stash[_ACCEPTANCE]

    def record(name: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
