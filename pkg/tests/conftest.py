import pytest


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        report.user_properties.append(("criterion", marker.args))


def pytest_terminal_summary(terminalreporter):
    results = {}
    for reports in terminalreporter.stats.values():
        for rep in reports:
            props = dict(getattr(rep, "user_properties", ()))
            if "criterion" not in props:
                continue
            number, title = props["criterion"]
            entry = results.setdefault(number, {"title": title, "ok": True, "seconds": 0.0})
            if rep.when == "call":
                entry["seconds"] += rep.duration
            if rep.failed or (rep.when == "call" and rep.skipped):
                entry["ok"] = False
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        r = results[number]
        status = "PASS" if r["ok"] else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {r['title']}  ({r['seconds']:.1f} s)")
