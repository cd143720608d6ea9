from ergopt.props import (
    PropertyResult,
    adapt_suite,
    birkhoff_suite,
    cocycle_suite,
    rotation_suite,
    run_all,
    symdyn_suite,
)


def test_result_semantics():
    assert PropertyResult("x", 1, -5e-10, 1e-9, "slack").passed
    assert not PropertyResult("x", 1, -5e-9, 1e-9, "slack").passed
    assert PropertyResult("x", 1, 5e-10, 1e-9, "error").passed
    assert not PropertyResult("x", 1, 5e-9, 1e-9, "error").passed


def test_symdyn_suite_exact():
    assert all(r.passed for r in symdyn_suite(0))


def test_individual_suites_small_seeds():
    for suite, seed in ((birkhoff_suite, 1), (rotation_suite, 2),
                        (cocycle_suite, 3), (adapt_suite, 4)):
        for result in suite(seed):
            assert result.passed, f"{suite.__name__}/{result.name}: {result.worst}"


def test_run_all_deterministic():
    a = run_all(7)
    b = run_all(7)
    assert a == b
    assert a["all_passed"]
