import numpy as np
import pytest

from trimac.common_parts import decompose
from trimac.models import (
    example2_channel,
    example2_source,
    table_channel,
    table_source,
)
from trimac.probability import (
    Alphabet,
    CondPmf,
    ProbabilityError,
    binary_entropy,
    joint_from_array,
)
from trimac.regions import (
    assemble_joint,
    ces_outer_objective,
    eval_prop1,
    eval_thm1,
    eval_two_user_ces,
    identity_qpart,
    make_scheme,
    reduced_example2_report,
    reduced_scheme,
    uniform_output_witness,
    x_equals_v_tables,
)
from trimac.search import gamma_star


def example2_joint(sigma, gamma, delta, x_sv=None, q=2, qpart=True):
    src = example2_source(sigma, gamma)
    parts = decompose(src)
    scheme = reduced_scheme(parts, x_sv or x_equals_v_tables(q), q=q)
    return assemble_joint(src, example2_channel(delta), scheme, parts,
                          identity_qpart(q) if qpart else None)


class TestAssemble:
    def test_dither_pair_uniform(self):
        j = example2_joint(0.3, 0.3, 0.125)
        pv = j.restrict_order(("V1", "V2"))
        assert np.allclose(pv, 0.25, atol=1e-12)

    def test_random_tables_normalized(self):
        rng = np.random.default_rng(7)
        src = example2_source(0.2, 0.4)
        parts = decompose(src)
        scheme = make_scheme(parts, src.sizes, (2, 2, 2), q=2,
                             u_sizes={"123": 2, "12": 2}, x_equals_v=False,
                             rng=rng)
        j = assemble_joint(src, example2_channel(0.125), scheme, parts,
                           identity_qpart(2))
        assert abs(float(j.values.sum()) - 1.0) < 1e-10

    def test_uniform_output_at_sigma_zero(self):
        for gamma in (0.1, 0.37):
            j = example2_joint(0.0, gamma, 0.0)
            assert j.entropy({"Y"}) == pytest.approx(2.0, abs=1e-10)

    def test_v3_is_parity(self):
        j = example2_joint(0.3, 0.3, 0.0)
        pv = j.restrict_order(("V1", "V2", "V3"))
        for v1 in (0, 1):
            for v2 in (0, 1):
                assert pv[v1, v2, v1 ^ v2] == pytest.approx(0.25, abs=1e-12)
                assert pv[v1, v2, 1 - (v1 ^ v2)] == 0.0

    def test_alphabet_mismatch_rejected(self):
        src = example2_source(0.2, 0.3)
        parts = decompose(src)
        scheme = reduced_scheme(parts, x_equals_v_tables(2), q=2)
        bad_qpart = identity_qpart(3)  # field mismatch with q=2 scheme
        with pytest.raises(ProbabilityError):
            assemble_joint(src, example2_channel(0.0), scheme, parts, bad_qpart)


class TestTwoUserCes:
    def test_clean_parallel_channel_tight(self):
        # independent uniform S1, S2; Y = (X1, X2) noiseless; X_i = S_i
        src = joint_from_array([("S1", 2), ("S2", 2)], np.full((2, 2), 0.25))
        kern = np.zeros((2, 2, 4))
        for x1 in (0, 1):
            for x2 in (0, 1):
                kern[x1, x2, 2 * x1 + x2] = 1.0
        channel = CondPmf((Alphabet("X1", 2), Alphabet("X2", 2)),
                          (Alphabet("Y", 4),), kern)
        rep = eval_two_user_ces(src, channel, np.array([1.0]),
                                np.eye(2)[:, None, :], np.eye(2)[:, None, :])
        assert len(rep.entries) == 4
        for e in rep.entries:
            assert e.slack == pytest.approx(0.0, abs=1e-12)

    def test_constant_sources_trivial(self):
        arr = np.zeros((2, 2))
        arr[0, 0] = 1.0
        src = joint_from_array([("S1", 2), ("S2", 2)], arr)
        kern = np.zeros((2, 2, 2))
        kern[..., 0] = 1.0
        channel = CondPmf((Alphabet("X1", 2), Alphabet("X2", 2)),
                          (Alphabet("Y", 2),), kern)
        rep = eval_two_user_ces(src, channel, np.array([1.0]),
                                np.eye(2)[:, None, :], np.eye(2)[:, None, :])
        assert all(e.lhs == 0.0 for e in rep.entries)
        assert rep.all_satisfied()

    def test_zero_capacity_violated(self):
        src = joint_from_array([("S1", 2), ("S2", 2)], np.diag([0.5, 0.5]))
        kern = np.zeros((2, 2, 2))
        kern[..., 0] = 1.0  # constant output
        channel = CondPmf((Alphabet("X1", 2), Alphabet("X2", 2)),
                          (Alphabet("Y", 2),), kern)
        rep = eval_two_user_ces(src, channel, np.array([1.0]),
                                np.eye(2)[:, None, :], np.eye(2)[:, None, :])
        total = [e for e in rep.entries if e.family == "total"][0]
        assert total.lhs == pytest.approx(1.0, abs=1e-12)
        assert total.rhs == pytest.approx(0.0, abs=1e-12)
        assert not total.satisfied()


class TestProp1:
    def test_entry_count(self):
        src = example2_source(0.2, 0.3)
        parts = decompose(src)
        scheme = make_scheme(parts, src.sizes, (2, 2, 2), q=1, x_equals_v=False)
        j = assemble_joint(src, example2_channel(0.0), scheme, parts, None)
        rep = eval_prop1(j)
        assert len(rep.entries) == 36
        fams = {f: sum(1 for e in rep.entries if e.family == f)
                for f in ("single", "pair", "triple", "total")}
        assert fams == {"single": 3, "pair": 24, "triple": 8, "total": 1}

    def test_remark2_total_entry(self):
        # sigma=0, S2=S3; X1 const, X2=S2, X3=S3 at delta=0: slack exactly 0
        gamma = 0.2
        assert binary_entropy(gamma) < 1.0  # 2 - H(N) at delta=0
        src = example2_source(0.0, gamma)
        parts = decompose(src)
        x1 = np.zeros((2, 1, 1, 1, 1, 2))
        x1[..., 0] = 1.0  # X1 = 0
        ident = np.zeros((2, 1, 1, 1, 1, 2))
        for s in (0, 1):
            ident[s, ..., s] = 1.0
        from trimac.regions import SchemeDistributions

        scheme = SchemeDistributions(
            1, np.array([1.0]),
            {b: np.ones((max(parts[b].k, 1), 1, 1)) for b in ("12", "13", "23")},
            (x1, ident.copy(), ident.copy()))
        j = assemble_joint(src, example2_channel(0.0), scheme, parts, None)
        rep = eval_prop1(j)
        total = [e for e in rep.entries if e.family == "total"][0]
        assert total.lhs == pytest.approx(binary_entropy(gamma), abs=1e-12)
        assert total.slack == pytest.approx(0.0, abs=1e-10)
        assert total.satisfied()

    def test_constant_sources_all_satisfied(self):
        arr = np.zeros((2, 2, 2))
        arr[0, 0, 0] = 1.0
        src = table_source([2, 2, 2], arr.ravel())
        parts = decompose(src)
        scheme = make_scheme(parts, src.sizes, (2, 2, 2), q=1, x_equals_v=False)
        j = assemble_joint(src, example2_channel(0.125), scheme, parts, None)
        rep = eval_prop1(j)
        assert all(e.lhs == 0.0 for e in rep.entries)
        assert rep.all_satisfied()


class TestThm1:
    def test_entry_count(self):
        j = example2_joint(0.2, 0.3, 0.0)
        rep = eval_thm1(j)
        assert len(rep.entries) == 267
        fams = {f: sum(1 for e in rep.entries if e.family == f)
                for f in ("single", "pair", "triple", "total")}
        assert fams == {"single": 3, "pair": 192, "triple": 64, "total": 8}

    @pytest.mark.parametrize("delta", [0.0, 0.125])
    def test_boundary_witness(self, delta):
        gs = gamma_star(delta)
        j = example2_joint(0.0, gs, delta)
        rep = eval_thm1(j)
        assert rep.min_slack() >= -1e-9

    def test_zero_lhs_trivial_entry(self):
        # pair (1,2) with k=3: lhs = h(sigma) = 0 at sigma = 0
        j = example2_joint(0.0, gamma_star(0.0), 0.0)
        rep = eval_thm1(j)
        e = rep.find("pair", roles=(1, 2, 3), a_set=(), b_set=())[0]
        assert e.lhs == pytest.approx(0.0, abs=1e-12)
        assert e.satisfied()

    def test_reduced_agrees_with_full(self):
        for sigma, gamma, delta in ((0.0, 0.5, 0.0), (0.1, 0.3, 0.125),
                                    (0.0, gamma_star(0.125), 0.125)):
            red = reduced_example2_report(sigma, gamma, delta)
            full = eval_thm1(example2_joint(sigma, gamma, delta))
            mapping = [
                ("pair", (2, 3, 1)),
                ("pair", (1, 2, 3)),
                ("pair", (1, 3, 2)),
                ("total", None),
            ]
            for red_entry, (fam, roles) in zip(red.entries, mapping):
                if fam == "pair":
                    twin = full.find(fam, roles=roles, a_set=(), b_set=())[0]
                else:
                    twin = full.find(fam, a_set=())[0]
                assert abs(red_entry.lhs - twin.lhs) < 1e-10
                assert abs(red_entry.rhs - twin.rhs) < 1e-10

    def test_degenerate_tv_reproduces_prop1(self):
        rng = np.random.default_rng(11)
        src = example2_source(0.15, 0.35)
        parts = decompose(src)
        scheme = make_scheme(parts, src.sizes, (2, 2, 2), q=1,
                             u_sizes={"123": 2, "12": 2, "13": 2, "23": 2},
                             x_equals_v=False, rng=rng)
        j = assemble_joint(src, example2_channel(0.125), scheme, parts, None)
        p1 = eval_prop1(j)
        t1 = eval_thm1(j)
        matched = 0
        for e in p1.entries:
            if e.family == "single":
                twin = t1.find("single", roles=e.roles)[0]
            elif e.family == "pair":
                twin = t1.find("pair", roles=e.roles, a_set=(), b_set=e.b_set)[0]
            elif e.family == "triple":
                twin = t1.find("triple", a_set=(), b_set=e.b_set)[0]
            else:
                twin = t1.find("total", a_set=())[0]
            assert abs(e.lhs - twin.lhs) < 1e-12
            assert abs(e.rhs - twin.rhs) < 1e-12
            matched += 1
        assert matched == 36

    def test_permutation_equivariance(self):
        # fully symmetric source (uniform parity set), symmetric adder channel
        table = np.zeros((2, 2, 2))
        for s1 in (0, 1):
            for s2 in (0, 1):
                table[s1, s2, s1 ^ s2] = 0.25
        src = table_source([2, 2, 2], table.ravel())
        kern = np.zeros((2, 2, 2, 4))
        for x1 in (0, 1):
            for x2 in (0, 1):
                for x3 in (0, 1):
                    kern[x1, x2, x3, x1 + x2 + x3] = 1.0
        channel = table_channel([2, 2, 2], 4, kern.ravel())
        parts = decompose(src)
        scheme = reduced_scheme(parts, x_equals_v_tables(2), q=2)
        j = assemble_joint(src, channel, scheme, parts, identity_qpart(2))
        rep = eval_thm1(j)
        singles = [e.slack for e in rep.entries if e.family == "single"]
        assert max(singles) - min(singles) < 1e-12
        pair_base = {e.roles: e.slack
                     for e in rep.entries
                     if e.family == "pair" and e.a_set == () and e.b_set == ()}
        vals = list(pair_base.values())
        assert max(vals) - min(vals) < 1e-12


class TestReducedReport:
    def test_boundary_delta_zero(self):
        rep = reduced_example2_report(0.0, 0.5, 0.0)
        slacks = [e.slack for e in rep.entries]
        assert abs(slacks[0]) <= 1e-9 and abs(slacks[3]) <= 1e-9
        assert all(s >= -1e-9 for s in slacks)

    def test_degenerate_lhs(self):
        rep = reduced_example2_report(0.0, 0.0, 0.0)
        assert all(e.lhs == 0.0 for e in rep.entries)

    def test_lhs_closed_forms(self):
        sigma, gamma = 0.2, 0.35
        conv = sigma * (1 - gamma) + gamma * (1 - sigma)
        rep = reduced_example2_report(sigma, gamma, 0.125)
        assert rep.entries[0].lhs == pytest.approx(binary_entropy(gamma))
        assert rep.entries[1].lhs == pytest.approx(binary_entropy(sigma))
        assert rep.entries[2].lhs == pytest.approx(
            binary_entropy(gamma) + binary_entropy(sigma) - binary_entropy(conv))
        assert rep.entries[3].lhs == pytest.approx(
            binary_entropy(gamma) + binary_entropy(sigma))

    def test_pure_witness_fails_for_positive_sigma(self):
        # with X_i = V_i the channel residual I(X1X2; Y | X3 S3 V3) is exactly
        # zero, so any sigma > 0 leaves entry (11) violated
        rep = reduced_example2_report(0.01, 0.49, 0.0)
        assert rep.entries[1].rhs == pytest.approx(0.0, abs=1e-12)
        assert rep.entries[1].slack < 0
        # and at delta=0 the total entry is impossible as well
        assert rep.entries[3].lhs > 1.0
        assert not rep.entries[3].satisfied()

    def test_perturbed_witness_strictly_positive(self):
        # X2 flipped with probability 1/32 independent of (s, v): all four
        # inequalities hold strictly at sigma=1e-3, gamma=gamma*-1e-2, delta=1/8
        delta = 0.125
        rho = 1 / 32
        flip = np.zeros((2, 2, 2))
        for v in (0, 1):
            flip[:, v, v] = 1 - rho
            flip[:, v, 1 - v] = rho
        tables = (x_equals_v_tables(2)[0], flip, x_equals_v_tables(2)[2])
        rep = reduced_example2_report(1e-3, gamma_star(delta) - 1e-2, delta,
                                      tables)
        for e in rep.entries:
            assert e.slack > 0.0


class TestCesOuterObjective:
    def test_constant_inputs_zero(self):
        src = example2_source(0.3, 0.3)
        const = np.zeros((2, 2))
        const[:, 0] = 1.0
        val = ces_outer_objective(src, example2_channel(0.125),
                                  [const, const, const])
        assert val == pytest.approx(0.0, abs=1e-12)

    def test_appendix_witness_reaches_cap(self):
        src = example2_source(0.0, 0.5)
        const0 = np.zeros((2, 2))
        const0[:, 0] = 1.0
        ident = np.eye(2)
        val = ces_outer_objective(src, example2_channel(0.0),
                                  [const0, ident, ident])
        assert val == pytest.approx(1.0, abs=1e-12)

    def test_identity_below_cap_for_skewed_source(self):
        # gamma < 1/2 keeps X3 = S3 non-uniform, so the output entropy and
        # hence I stay strictly under 2 - H(N); at gamma = 1/2 the identity
        # tables reach the cap exactly (X3 uniform and equal to X1 xor X2)
        src = example2_source(0.2, 0.3)
        ident = np.eye(2)
        val = ces_outer_objective(src, example2_channel(0.0),
                                  [ident, ident, ident])
        assert val == pytest.approx(binary_entropy(0.3), abs=1e-12)
        assert val < 1.0 - 1e-6
        src_half = example2_source(0.2, 0.5)
        val_half = ces_outer_objective(src_half, example2_channel(0.0),
                                       [ident, ident, ident])
        assert val_half == pytest.approx(1.0, abs=1e-12)


class TestUniformOutputWitness:
    def test_parity_witness(self):
        # X1 uniform, X2 uniform independent, X3 = X1 xor X2
        j = joint_from_array([("X1", 2), ("X2", 2)], np.full((2, 2), 0.25))
        j = j.attach_function(("X1", "X2"), lambda a, b: a ^ b, Alphabet("X3", 2))
        j = j.compose(example2_channel(0.125).kernel)
        w = uniform_output_witness(j, 0.125)
        assert w.is_uniform
        assert w.q_vector == pytest.approx((0.5, 0.0, 0.5), abs=1e-12)
        assert w.violation <= 1e-12

    def test_all_zero_inputs(self):
        arr = np.zeros((2, 2, 2))
        arr[0, 0, 0] = 1.0
        j = joint_from_array([("X1", 2), ("X2", 2), ("X3", 2)], arr)
        j = j.compose(example2_channel(0.0).kernel)
        w = uniform_output_witness(j, 0.0)
        assert not w.is_uniform
        assert w.q_vector == pytest.approx((1.0, 0.0, 0.0), abs=1e-12)

    @pytest.mark.parametrize("delta", [0.0, 0.125, 0.375])
    def test_parity_defect_never_uniform(self, delta):
        # P(X3 != X1 xor X2) = 0.1 forces q(1) = 0.1
        j = joint_from_array([("X1", 2), ("X2", 2)], np.full((2, 2), 0.25))
        flip = np.zeros((2, 2, 2))
        for x1 in (0, 1):
            for x2 in (0, 1):
                flip[x1, x2, x1 ^ x2] = 0.9
                flip[x1, x2, 1 - (x1 ^ x2)] = 0.1
        j = j.compose(CondPmf((Alphabet("X1", 2), Alphabet("X2", 2)),
                              (Alphabet("X3", 2),), flip))
        j = j.compose(example2_channel(delta).kernel)
        w = uniform_output_witness(j, delta)
        assert w.q_vector[1] == pytest.approx(0.1, abs=1e-12)
        assert not w.is_uniform
        assert w.violation > 1e-6

    def test_quarter_rejected(self):
        j = joint_from_array([("X1", 2), ("X2", 2)], np.full((2, 2), 0.25))
        j = j.attach_function(("X1", "X2"), lambda a, b: a ^ b, Alphabet("X3", 2))
        j = j.compose(example2_channel(0.125).kernel)
        with pytest.raises(ProbabilityError):
            uniform_output_witness(j, 0.25)

    def test_iff_characterization_randomized(self):
        # near-uniform output only happens with q(1) ~ 0 and q(0) ~ 1/2
        rng = np.random.default_rng(5)
        for delta in (0.0, 0.125, 0.375):
            ch = example2_channel(delta)
            for _ in range(100):
                ps = [rng.random(2) for _ in range(3)]
                ps = [p / p.sum() for p in ps]
                arr = np.einsum("a,b,c->abc", *ps)
                j = joint_from_array([("X1", 2), ("X2", 2), ("X3", 2)], arr)
                j = j.compose(ch.kernel)
                w = uniform_output_witness(j, delta)
                if w.violation < 1e-9:
                    assert w.q_vector[1] < 1e-6
                    assert abs(w.q_vector[0] - 0.5) < 1e-6


class TestDataProcessing:
    def test_rhs_within_output_capacity(self):
        j = example2_joint(0.2, 0.3, 0.125)
        rep = eval_thm1(j)
        for e in rep.entries:
            assert -1e-12 <= e.rhs <= 2.0 + 1e-12


class TestReportCsv:
    def test_columns_fixed(self):
        rep = reduced_example2_report(0.0, 0.5, 0.0)
        text = rep.to_csv()
        header = text.splitlines()[0]
        assert header == ("family,roles,A,B,lhs_bits,rhs_bits,slack_bits,"
                          "satisfied")
        assert len(text.splitlines()) == 5
