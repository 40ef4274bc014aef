ACCEPTANCE = []


def record(name, ok, detail=""):
    """``ok`` is True/False, or None for a criterion that could not be evaluated here."""
    ACCEPTANCE.append((name, None if ok is None else bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{status}  {name}: {detail}")
