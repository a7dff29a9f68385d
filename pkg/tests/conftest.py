import pytest

ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:2d}. {title}: {detail}")


@pytest.fixture(scope="session")
def warm():
    """Compile the numba kernels once so timed sections measure solving only."""
    import numpy as np

    from shotgun.sgd_baseline import sgd_run
    from shotgun.solver_par import ParConfig, solve_shotgun
    from shotgun.solver_seq import SeqConfig, solve_sequential
    from shotgun.synthetic import lasso_instance, logistic_instance

    for p in (lasso_instance(10, 8, seed=0), logistic_instance(10, 8, seed=0)):
        for variant in ("fixed", "cdn"):
            solve_sequential(p, SeqConfig(variant=variant, max_epochs=2, trace_every=1))
            solve_shotgun(p, ParConfig(p=2, mode="async", variant=variant, max_epochs=2, log_commits=True))
        sgd_run(p, 0.01, 1, np.random.default_rng(0), lazy=True)
        sgd_run(p, 0.01, 1, np.random.default_rng(0), lazy=False)
    return True
