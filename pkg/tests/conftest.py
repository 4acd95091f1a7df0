import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    """Store a one-line PASS/FAIL verdict for the terminal summary."""

    def record(number: int, title: str, passed: bool, detail: str = ""):
        line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES, key=lambda item: item[0]):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def front_2d_snapshots():
    """2D run with eps = 0.01 on a 40 x 40 grid, sampled at t = 0, 0.25, 0.5 (about 2.5 min)."""
    import time

    from ieldtm.harness import ExperimentConfig, build_problem, profile_snapshots

    cfg = ExperimentConfig(problem="burgers2d", eps=0.01, N=40, theta=0.5, K=4, dt=0.01, t_f=0.5)
    start = time.perf_counter()
    snaps = profile_snapshots(cfg, [0.0, 0.25, 0.5], write=False)
    return cfg, build_problem(cfg), snaps, time.perf_counter() - start
