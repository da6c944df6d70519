from hypothesis import settings

settings.register_profile("default", deadline=None)
settings.load_profile("default")

_verdicts = {}


def pytest_runtest_logreport(report):
    label = dict(report.user_properties).get("criterion")
    if label is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        props = dict(report.user_properties)
        _verdicts[label] = ("PASS" if report.passed else "FAIL", props.get("title", ""),
                            props.get("measured", ""))


def pytest_runtest_setup(item):
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        item.user_properties.append(("criterion", mark.args[0]))
        item.user_properties.append(("title", mark.args[1]))


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_verdicts, key=lambda s: (int(s.rstrip("abc")), s)):
        verdict, title, measured = _verdicts[label]
        line = f"criterion {label:<3} {verdict}  {title}"
        if measured:
            line += f"  [{measured}]"
        terminalreporter.write_line(line)
