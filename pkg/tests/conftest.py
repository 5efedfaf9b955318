import shared


def _key(c):
    num = "".join(ch for ch in c if ch.isdigit())
    return int(num), c


def pytest_terminal_summary(terminalreporter):
    if not shared.ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(shared.ACCEPTANCE, key=_key):
        ok, text = shared.ACCEPTANCE[c]
        terminalreporter.write_line(f"criterion {c}: {'PASS' if ok else 'FAIL'} | {text}")
