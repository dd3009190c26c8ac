"""Collects acceptance outcomes and prints one line per criterion at the end."""

ACCEPTANCE = {}

CRITERIA = {
    1: "CVaR axioms on 1000 random distributions",
    2: "closed-form CVaR vs grid minimum on 1000 distributions",
    3: "solver vs brute-force grid oracle on 20 micro instances",
    4: "objective trends on the reference instance sweep",
    5: "value of the stochastic solution",
    6: "flow balance, capacity and routing optimality",
    7: "byte-identical repeated solve and sweep",
}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in CRITERIA.items():
        if n not in ACCEPTANCE:
            terminalreporter.write_line(f"[----] {n}. {title}: not run")
            continue
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n}. {title}: {detail}")
