"""Prints a one-line verdict per acceptance criterion after the run."""

ACCEPTANCE = [
    ("test_a01_rasterization_conservation",
     "A1   rasterization conserves per-slot totals (100 instances, rel 1e-9, <10s)"),
    ("test_a02_metric_oracle_equivalence",
     "A2   prmse/u/corr match a direct-summation oracle (1000 series, rel 1e-12)"),
    ("test_a03_hand_case_faithful",
     "A3   hand case x=[1,2,3] y=[2,3,4]: prmse 0.5 exact, corr 1 exact, u to 1e-12"),
    ("test_a03_hand_case_pinned_u_constant",
     "A3*  literal constant u=0.18981 +/- 1e-5 (mistranscribed: derivation gives 0.1897759; red by design)"),
    ("test_a04_moran_checkerboard",
     "A4   3x3 checkerboard, binary queen: I = -0.19 +/- 1e-12; constant field raises typed error"),
    ("test_a05_lisa_consistency",
     "A5   slope(lag~value) = I +/- 1e-9; mean(lisa)/I constant across 100 random fields"),
    ("test_a06_layout_near_optimal_small",
     "A6a  layout objective <= 1.1x brute force in >= 95/100 seeded instances (k <= 10)"),
    ("test_a06_layout_structure_fuzz",
     "A6b  order preserved and sum(counts) = k in 10000 fuzzed instances (k <= 200)"),
    ("test_a07_sixteen_equal_dots_square",
     "A7   16 equal dots, square enclosure: n=4, counts [4,4,4,4], objective 0"),
    ("test_a08_error_tracks_volume",
     "A8   corr(mean_abs_error, mean_volume) > 0.5 on the quick synthetic run"),
    ("test_a09_quick_under_budget_and_deterministic",
     "A9   quick pipeline < 60s; same seed twice -> byte-identical stores"),
    ("test_a10_api_schema_and_expansion",
     "A10  every endpoint schema-valid; 2x2 coarse rect -> exactly 64 ids at 200x100"),
]

_PRECEDENCE = {"PASS": 0, "SKIP": 1, "RED*": 2, "FAIL": 3}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    status = {}
    for category, label in (
        ("passed", "PASS"),
        ("failed", "FAIL"),
        ("error", "FAIL"),
        ("xfailed", "RED*"),
        ("xpassed", "FAIL"),
        ("skipped", "SKIP"),
    ):
        for rep in terminalreporter.stats.get(category, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            base = nodeid.split("::")[-1].split("[")[0]
            prev = status.get(base)
            if prev is None or _PRECEDENCE[label] > _PRECEDENCE[prev]:
                status[base] = label
    if not status:
        return
    terminalreporter.section("acceptance criteria")
    for name, line in ACCEPTANCE:
        terminalreporter.write_line(f"{status.get(name, '----'):>4}  {line}")
