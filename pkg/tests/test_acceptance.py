"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are printed with
capture disabled so they show in any mode).
"""

import contextlib
import io
import random
import time
from fractions import Fraction as F

import pytest
from cli_cases import CASES, extra_outputs, resolve
from conftest import one_period

from robust_ftap.arbitrage import (
    approximate_class,
    check_na,
    check_sna,
    find_witness_measure,
    moment_errors,
    validate_approximate,
    validate_arbitrage,
    validate_martingale,
)
from robust_ftap.cli import main
from robust_ftap.generate import (
    CORRUPTIONS,
    corrupt_sheet,
    generate,
    random_marginal_pair,
    random_quote_sheet,
    suite_config,
)
from robust_ftap.market import Claim, polar_set
from robust_ftap.mot import (
    AssetQuotes,
    Order,
    convex_order_check,
    implied_marginal,
    martingale_coupling,
    payoff_nonnegative,
    portfolio_cost,
    quote_diagnostics,
    support_function,
)
from robust_ftap.oracles import oracle_na
from robust_ftap.superhedge import duality_check, sensitivity_report, superhedge_global, superhedge_qs


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'} {title}: {detail}")
        return ok

    return emit


def random_claim(market, rng):
    return Claim({w: F(rng.randint(-8, 8), rng.randint(1, 4)) for w in market.tree.leaves})


def na_suite():
    for seed in range(200):
        m = generate(suite_config(seed))
        if check_na(m, threads=1).ok:
            yield seed, m


def test_criterion_1_ftap_equivalence(report):
    started = time.perf_counter()
    agree = valid = 0
    failures = []
    for seed in range(200):
        m = generate(suite_config(seed))
        v = check_na(m)
        o = oracle_na(m)
        if v.ok == o.na:
            agree += 1
        else:
            failures.append(("disagree", seed))
        if v.ok:
            charged = {w for w, q, d in v.measures if d > 0 and validate_martingale(m, q) == [] and q[w] == d}
            ok = charged == set(polar_set(m.tree, m.priors).qs_support)
        else:
            ok = validate_arbitrage(m, v.witness)
        valid += ok
        if not ok:
            failures.append(("witness", seed))
    elapsed = time.perf_counter() - started
    # the budget covers check_na alone; the oracle runs alongside for the comparison
    t0 = time.perf_counter()
    for seed in range(200):
        check_na(generate(suite_config(seed)))
    solve_time = time.perf_counter() - t0
    ok = agree == 200 and valid == 200 and solve_time < 60
    detail = f"agree {agree}/200, witnesses valid {valid}/200, check_na {solve_time:.1f}s (with oracle {elapsed:.1f}s)"
    assert report(1, "FTAP equivalence", ok, detail), failures[:5]


def test_criterion_2_superhedging_duality(report):
    instances = claims = exact = floats = 0
    failures = []
    for seed, m in na_suite():
        instances += 1
        rng = random.Random(f"claims-{seed}")
        for _ in range(5):
            x = random_claim(m, rng)
            claims += 1
            rec = superhedge_qs(m, x).price
            glob = superhedge_global(m, x).price
            d = duality_check(m, x)
            if rec == glob == d.primal == d.dual and d.gap == 0:
                exact += 1
            else:
                failures.append((seed, rec, glob, d.dual))
            fl = duality_check(m, x, tol=1e-9)
            if abs(fl.primal - fl.dual) <= 1e-9 and abs(fl.primal - float(rec)) <= 1e-9:
                floats += 1
    ok = exact == claims and floats == claims and instances > 0
    detail = f"{instances} NA instances, {claims} claims: exact gap 0 in {exact}, float within 1e-9 in {floats}"
    assert report(2, "superhedging duality", ok, detail), failures[:5]


def test_criterion_3_sensitivity(report):
    # kernel instances are drawn from the suite in seed order, keeping NA ones
    found, seed, zero, tested = 0, 0, 0, 0
    failures = []
    while found < 100:
        m = generate(suite_config(seed, kernel=True))
        seed += 1
        if not check_na(m, threads=1).ok:
            continue
        found += 1
        rng = random.Random(f"kernel-claims-{seed - 1}")
        for _ in range(2):
            tested += 1
            gap = sensitivity_report(m, random_claim(m, rng)).gap
            zero += gap == 0
            if gap != 0:
                failures.append((seed - 1, gap))
    three = one_period({"a": 2, "b": F(1, 2), "c": 2}, [{"a": F(1, 2), "b": F(1, 2)}, {"c": 1}])
    reg_gap = sensitivity_report(three, Claim({"a": 0, "b": 0, "c": 1})).gap
    na, sna = check_na(three).ok, check_sna(three).ok
    ok = zero == tested and reg_gap > 0 and na and not sna
    detail = (
        f"kernel gap 0 on {zero}/{tested} claims over {found} NA instances (seeds 0..{seed - 1}); "
        f"three-state gap {reg_gap}, NA {na}, sNA {sna}"
    )
    assert report(3, "sensitivity", ok, detail), failures[:5]


def test_criterion_4_approximate_bounds(report):
    instances, members, bad = 0, 0, []
    seed = 0
    while instances < 20:
        m = generate(suite_config(seed, options=1))
        seed += 1
        if not check_na(m, threads=1).ok:
            continue
        polar = polar_set(m.tree, m.priors)
        leaf = sorted(polar.qs_support)[0]
        ac = approximate_class(m, leaf, 100, perturb=True)
        instances += 1
        for n, q in ac.members:
            members += 1
            errs = moment_errors(m, q)
            if any(abs(e) > F(1, n) for e in errs.values()) or validate_approximate(m, q, n, ac.dominating):
                bad.append((seed - 1, n))
            if q[leaf] < ac.delta or ac.delta <= 0:
                bad.append((seed - 1, n, "delta"))
    ok = not bad and members == 20 * 100
    detail = f"{members} measures over {instances} instances with options, violations {len(bad)}"
    assert report(4, "approximate martingale bounds", ok, detail), bad[:5]


def test_criterion_5_breeden_litzenberger(report):
    good, bad = 0, []
    for seed in range(50):
        aq = random_quote_sheet(seed).assets["0"]
        R = support_function(aq)
        mu = implied_marginal(R)
        touching = [k for k, c in aq.quotes if R(k) == c]
        ok = (
            sum(m for _, m in mu.atoms) == 1
            and mu.mean() == aq.spot
            and all(mu.call(k) == R(k) for k in touching)
            and len(aq.quotes) <= 8
        )
        good += ok
        if not ok:
            bad.append(seed)
    worked = implied_marginal(support_function(AssetQuotes(F(1), ((F(1), F(1, 4)), (F(2), F(0))))))
    worked_ok = worked.atoms == ((0, F(1, 4)), (1, F(1, 2)), (2, F(1, 4)))
    ok = good == 50 and worked_ok
    detail = f"round trip exact on {good}/50 sheets; worked sheet atoms {[(str(x), str(m)) for x, m in worked.atoms]}"
    assert report(5, "Breeden-Litzenberger round trip", ok, detail), bad


def test_criterion_6_convex_order(report):
    agree, ordered, bad = 0, 0, []
    for seed in range(100):
        mu, nu = random_marginal_pair(seed)
        assert len(mu.atoms) <= 8 and len(nu.atoms) <= 8
        a = convex_order_check(mu, nu).verdict is Order.ORDERED
        b = martingale_coupling(mu, nu) is not None
        agree += a == b
        ordered += a
        if a != b:
            bad.append(seed)
    ok = agree == 100
    detail = f"agree {agree}/100 ({ordered} ordered, {100 - ordered} not)"
    assert report(6, "convex order vs coupling", ok, detail), bad


def test_criterion_7_quote_diagnostics(report):
    detected = {k: 0 for k in CORRUPTIONS}
    sound = total = 0
    for kind in CORRUPTIONS:
        for seed in range(20):
            sheet = corrupt_sheet(random_quote_sheet(seed), kind, seed)
            d = quote_diagnostics(sheet)
            detected[kind] += kind in {v.type for v in d.violations}
            for v in d.violations:
                total += 1
                aq = sheet.assets[v.asset]
                sound += payoff_nonnegative(v.portfolio) and v.cost < 0 and portfolio_cost(aq, v.portfolio) == v.cost
    ok = all(n == 20 for n in detected.values()) and sound == total
    detail = f"detected {detected}; sound portfolios {sound}/{total}"
    assert report(7, "quote diagnostics", ok, detail)


def test_criterion_8_determinism(report, tmp_path, monkeypatch):
    from test_cli import golden

    mismatches = []
    for threads in ("1", "4"):
        monkeypatch.setenv("ROBUST_FTAP_THREADS", threads)
        for rep in range(2):
            out = tmp_path / f"{threads}-{rep}"
            out.mkdir()
            for name, argv, _ in CASES:
                buf = io.StringIO()
                with contextlib.redirect_stdout(buf):
                    main(resolve(argv, str(out)))
                if buf.getvalue() != golden(name + ".json"):
                    mismatches.append((threads, rep, name))
                for extra in extra_outputs(argv):
                    if (out / extra).read_text(encoding="utf-8") != golden(f"{name}.{extra}"):
                        mismatches.append((threads, rep, name, extra))
    ok = not mismatches
    detail = f"{len(CASES)} reports x 2 runs x threads {{1, 4}}: {len(mismatches)} mismatches"
    assert report(8, "determinism", ok, detail), mismatches[:5]


def test_witness_measures_exist_for_every_charged_leaf():
    # companion to criterion 1: the direct per-leaf query agrees with check_na
    for seed, m in list(na_suite())[:10]:
        for leaf in sorted(polar_set(m.tree, m.priors).qs_support):
            q, delta = find_witness_measure(m, leaf)
            assert delta > 0 and q[leaf] == delta
