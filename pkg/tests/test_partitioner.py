import numpy as np
import pytest

from conftest import make_instance
from mdvrp_lab.baselines import brute_force
from mdvrp_lab.core import Solution, solution_cost, validate
from mdvrp_lab.env import DEPOT, Action, EnvState, _base_mask, init_state
from mdvrp_lab.features import to_polar
from mdvrp_lab.instancegen import GenConfig, generate, rng_for
from mdvrp_lab.nn import Tensor, grad_check, no_grad
from mdvrp_lab.partitioner import (DecodeConfig, DecodeMode, candidate_set, decode_batch, encode,
                                   init_partitioner_params, nsl, nsl_logits, parallel_k,
                                   resolve_k, rollout, tslcgl, tslcgl_scores)
from mdvrp_lab.router import RouterKind, route_solution


@pytest.fixture(scope="module")
def params():
    return init_partitioner_params(np.random.default_rng(0), dim=16, layers=1, heads=2)


def test_resolve_k():
    assert [resolve_k(p, 100) for p in (30, 40, 50, 60)] == [30, 40, 50, 60]
    assert [resolve_k(p, 20) for p in (30, 50, 100)] == [6, 10, 20]
    assert resolve_k(30, 7) == 3
    assert resolve_k(1, 5) == 1


def test_candidate_set_examples():
    inst = make_instance([(0, 0), (10, 0)], [(1, 0), (2, 0), (9, 0), (8, 0)], [1] * 4, 10)
    st = init_state(inst)
    assert candidate_set(st, 10).tolist() == [0, 1, 2, 3]
    assert candidate_set(st, 1).tolist() == [0, 2]
    tie = make_instance([(0, 0)], [(0, 1), (1, 0), (0, -1)], [1] * 3, 10)
    assert candidate_set(init_state(tie), 1).tolist() == [0]
    st.apply(Action(0, 0))
    assert candidate_set(st, 1).tolist() == [1, 2]


def test_single_tour_is_chosen(params):
    inst = make_instance([(0, 0)], [(0.1, 0.2), (0.5, 0.5), (0.9, 0.1)], [1] * 3, 10)
    st = init_state(inst)
    H = encode(params, to_polar(inst))
    idx, X, logits = tslcgl(params, H, st, candidate_set(st, 2))
    assert idx == 0 and X.shape == (2, 16) and logits.shape == (1,)


def test_infeasible_tour_gets_minus_inf(params):
    inst = make_instance([(0, 0), (1, 1)], [(0.1, 0.2), (0.5, 0.5), (0.9, 0.1)], [5, 5, 5], 10)
    st = init_state(inst)
    st.inactive = [st.active[0]] * 3  # l_max = 4; 3 closed + one initiated exhausts standby
    st.apply(Action(0, 0))
    H = encode(params, to_polar(inst))
    idx, _, logits = tslcgl(params, H, st, candidate_set(st, 3))
    assert logits[1] == -np.inf and idx == 0
    assert -10 < logits[0] < 10


def test_nsl_probabilities(params):
    inst = make_instance([(0, 0)], [(0.1, 0.2), (0.5, 0.5), (0.9, 0.1)], [4, 5, 7], 10)
    st = init_state(inst)
    H = encode(params, to_polar(inst))
    zeta = candidate_set(st, 3)
    _, X, _ = tslcgl(params, H, st, zeta)
    p = nsl(params, H, X, zeta, 0, st)
    assert p.shape == (4,) and abs(p.sum() - 1) < 1e-12 and p[0] == 0
    st.apply(Action(0, 1))
    st.apply(Action(0, 0))   # remaining 1: nothing fits, only the depot is open
    zeta = candidate_set(st, 3)
    _, X, _ = tslcgl(params, H, st, zeta)
    assert nsl(params, H, X, zeta, 0, st).tolist() == [1, 0, 0, 0]


def _tsl_point(rng, L=2, Z=3, d=2, D=8):
    return [rng.normal(size=s) * 0.5 for s in
            [(D, D), (2 * D + 1, D), (2 * D + 1, D), (D, D), (2 * D + 1, D), (L, Z, D), (L, d, 2 * D + 1)]]


@pytest.mark.parametrize("seed", range(5))
def test_grad_tslcgl(seed):
    rng = np.random.default_rng(seed)
    exists = np.array([[True, True], [True, False]])
    zv = np.array([[True, True, False], [True, True, True]])
    R = rng.normal(size=(2, 3, 8))
    names = ["tsl.Wq1", "tsl.Wk1", "tsl.Wv1", "tsl.Wq2", "tsl.Wk2"]

    def f(*t):
        X, s = tslcgl_scores(dict(zip(names, t[:5])), t[5], t[6], exists, zv, 2)
        return (s * Tensor(np.array([[1.0, -2.0], [0.5, 3.0]]))).sum() + (X * Tensor(R)).sum()
    assert grad_check(f, _tsl_point(rng)) < 1e-4


@pytest.mark.parametrize("seed", range(5))
def test_grad_nsl(seed):
    rng = np.random.default_rng(seed)
    D = 8
    mask = np.array([[False, True, True, False, True], [True, True, False, False, False]])
    pick = np.array([2, 0])
    names = ["nsl.Wq3", "nsl.Wk3", "nsl.Wv2", "nsl.Wo"]
    from mdvrp_lab.nn import log_softmax

    def f(Wq3, Wk3, Wv2, Wo, E, q):
        P = dict(zip(names, (Wq3, Wk3, Wv2, Wo)))
        lp = log_softmax(nsl_logits(P, E, q, mask, 2), allowed=mask)
        return lp[np.arange(2), pick].sum()
    point = [rng.normal(size=s) * 0.5 for s in [(3 * D + 1, D), (D, D), (D, D), (D, D), (2, 5, D), (2, 3 * D + 1)]]
    assert grad_check(f, point) < 1e-4


def test_greedy_deterministic_and_feasible(params):
    inst = generate(GenConfig(n_customers=15, n_depots=3, capacity=30, seed=4))
    a, _ = rollout(inst, params)
    b, _ = rollout(inst, params)
    assert a == b
    sol = Solution(tuple(a))
    assert validate(inst, sol).is_feasible and sol.n_opened <= inst.n_depots + -(-inst.total_demand // 30)


def test_sampling_reproducible_and_no_worse(params):
    inst = generate(GenConfig(n_customers=12, n_depots=2, capacity=30, seed=5))
    cfg = DecodeConfig(mode=DecodeMode.SAMPLE, samples=16, k=5, seed=3)
    a, la = rollout(inst, params, cfg)
    b, lb = rollout(inst, params, cfg)
    assert a == b and la == lb
    from mdvrp_lab.partitioner import nn2opt_cost
    one, _ = rollout(inst, params, DecodeConfig(mode="sample", samples=1, k=5, seed=3))
    assert nn2opt_cost(inst, a) <= nn2opt_cost(inst, one) + 1e-12


def test_batch_matches_single(params):
    insts = [generate(GenConfig(n_customers=10, n_depots=2, capacity=30, seed=6), i) for i in range(4)]
    with no_grad():
        batch, lp = decode_batch(params, insts, 4)
        for i, inst in enumerate(insts):
            one, lp1 = decode_batch(params, [inst], 4)
            assert one[0] == batch[i]
            assert abs(lp1.data[0] - lp.data[i]) < 1e-9


def test_batch_rejects_mixed_sizes(params):
    with pytest.raises(ValueError):
        decode_batch(params, [generate(GenConfig(5, 1)), generate(GenConfig(6, 1))], 3)


def test_oracle_lower_bound(params):
    for i in range(5):
        inst = generate(GenConfig(n_customers=6, n_depots=2, capacity=15, seed=8), i)
        part, _ = rollout(inst, params, DecodeConfig(k=3))
        cost = solution_cost(inst, route_solution(inst, part, RouterKind.EXACT_DP))
        assert cost >= solution_cost(inst, brute_force(inst)) - 1e-9


def test_parallel_k(params):
    inst = generate(GenConfig(n_customers=20, n_depots=2, capacity=30, seed=9))
    single = route_solution(inst, rollout(inst, params, DecodeConfig(k=6))[0])
    assert parallel_k(inst, params, [6]) == single
    ks = [resolve_k(p, 20) for p in (30, 40, 50, 60)]
    best = parallel_k(inst, params, ks)
    each = [solution_cost(inst, route_solution(inst, rollout(inst, params, DecodeConfig(k=k))[0])) for k in ks]
    assert abs(solution_cost(inst, best) - min(each)) < 1e-12


def test_decoding_never_takes_masked_action(params, monkeypatch):
    original = EnvState.apply
    count = [0]

    def checked(self, action):
        tour = self.active[action.tour_index]
        mask = _base_mask(self, tour)
        slot = 0 if action.node == DEPOT else action.node + 1
        assert mask[slot] or (slot == 0 and not any(_base_mask(self, t).any() for t in self.active))
        count[0] += 1
        return original(self, action)
    monkeypatch.setattr(EnvState, "apply", checked)
    insts = [generate(GenConfig(n_customers=20, n_depots=3, capacity=30, seed=10), i) for i in range(16)]
    with no_grad():
        decode_batch(params, insts, 5, greedy=False, rngs=[rng_for(1, i) for i in range(16)])
    assert count[0] > 300
