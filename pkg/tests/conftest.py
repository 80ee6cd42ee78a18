RESULTS: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> bool:
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} | {detail}"
    RESULTS[n] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance")
    for n in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[n])
