import numpy as np
import pytest

import sptucker


def ten_slice():
    sizes = [5] * 7 + [18, 22, 25]
    coords, values = [], []
    for l, size in enumerate(sizes):
        for j in range(size):
            coords.append([l, j, (l + j) % 3])
            values.append(1.0)
    return sptucker.SparseTensor([10, 25, 3], coords, values)


def random_tensor(dims, nnz, seed):
    rng = np.random.default_rng(seed)
    flat = rng.choice(int(np.prod(dims)), size=nnz, replace=False)
    coords = np.stack(np.unravel_index(flat, dims, order="F"), axis=1).tolist()
    return sptucker.SparseTensor(list(dims), coords, rng.uniform(-1, 1, nnz).tolist())


def test_parse_and_shape():
    t = sptucker.parse_tns("1 1 1 2.0\n2 3 1 1.0\n1 1 1 1.0\n")
    assert t.order == 3
    assert t.nnz == 2
    assert t.dims == [2, 3, 1]
    assert t.norm_squared() == pytest.approx(10.0)
    with pytest.raises(ValueError):
        sptucker.parse_tns("0 1 1 1.0\n")


def test_lite_metrics_on_worked_example():
    t = ten_slice()
    s = sptucker.build_scheme(t, "lite", 5)
    assert not s.uni_policy
    m = sptucker.metrics(t, s, 2)
    mode1 = m["modes"][0]
    assert (mode1["e_max"], mode1["r_sum"], mode1["r_max"]) == (20, 14, 4)
    assert m["verdicts_hold"]


def test_grid_and_medium():
    assert sptucker.grid_factorize(16, [40, 20, 20]) == [4, 2, 2]
    t = random_tensor((40, 20, 20), 400, 1)
    s = sptucker.build_scheme(t, "medium", 16, seed=3)
    assert s.uni_policy
    assert s.grid == [4, 2, 2]
    assert len(s.assignment(0)) == t.nnz


def test_decompose_matches_oracle():
    t = random_tensor((5, 4, 3), 40, 2)
    s = sptucker.build_scheme(t, "lite", 3)
    r = sptucker.decompose(t, s, [2, 2, 2], invocations=5, lanczos="converge")
    ref = sptucker.oracle_fit(t, [2, 2, 2], invocations=5)
    assert r["final_fit"] == pytest.approx(ref[-1], abs=1e-8)
    for f in r["factors"]:
        assert np.allclose(f.T @ f, np.eye(f.shape[1]), atol=1e-10)
    assert len(r["fit_history"]) == 5


def test_external_policy_and_errors():
    t = ten_slice()
    policy = "\n".join(str(e % 4) for e in range(t.nnz)) + "\n"
    s = sptucker.build_scheme(t, "external", 4, policy=policy)
    assert s.kind == "external"
    with pytest.raises(ValueError):
        sptucker.build_scheme(t, "nonsense", 4)
    with pytest.raises(ValueError):
        sptucker.decompose(t, s, [20, 2, 2])
