import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from valleyseek import baselines as B


class TestKNN:
    def test_self_retrieval(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [5.0, 5.0]])
        y = np.array([3, 4, 5])
        m = B.KNN(k=1).fit(X, y)
        assert m.predict(X).tolist() == [3, 4, 5]

    def test_full_votes(self):
        X = np.array([[0.0], [0.1], [0.2], [10.0]])
        y = np.array([1, 1, 1, 2])
        assert B.KNN(k=3).fit(X, y).rank([[0.05]])[0].tolist() == [1, 2]

    def test_two_one_split(self):
        X = np.array([[0.0], [1.0], [2.0], [2.5], [9.0]])
        y = np.array([0, 1, 1, 0, 0])
        # neighbours of 1.6: 2.0 (1), 1.0 (1), 2.5 (0)
        r = B.KNN(k=3).fit(X, y).rank([[1.6]])[0]
        assert r.tolist() == [1, 0]

    def test_vote_tie_goes_to_nearer(self):
        X = np.array([[0.0], [3.0], [-1.5]])
        y = np.array([0, 1, 2])
        # k=3 gives one vote each; mean distance decides
        assert B.KNN(k=3).fit(X, y).rank([[2.0]])[0].tolist() == [1, 0, 2]

    def test_label_tie(self):
        X = np.array([[-1.0], [1.0]])
        assert B.KNN(k=1).fit(X, np.array([8, 4])).rank([[-1.0]])[0].tolist() == [8, 4]
        m = B.KNN(k=1).fit(np.array([[0.0], [0.0]]), np.array([8, 4]))
        assert m.predict([[0.0]])[0] in (4, 8)

    @pytest.mark.parametrize("k", [0, 2, -1, 1.5])
    def test_bad_k(self, k):
        with pytest.raises(ValueError):
            B.KNN(k=k)

    def test_fit_errors(self):
        with pytest.raises(ValueError):
            B.KNN(k=5).fit(np.zeros((3, 2)), np.zeros(3))
        with pytest.raises(ValueError):
            B.KNN(k=1).fit(np.zeros((0, 2)), np.zeros(0))
        with pytest.raises(RuntimeError):
            B.KNN().predict([[0.0]])

    @settings(max_examples=60)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([1, 3, 5]))
    def test_permutation_and_duplicates(self, seed, k):
        g = np.random.Generator(np.random.PCG64(seed))
        X = g.standard_normal((30, 3))
        y = g.integers(0, 3, 30)
        Q = g.standard_normal((10, 3))
        base = B.KNN(k=k).fit(X, y).rank(Q)
        perm = g.permutation(30)
        np.testing.assert_array_equal(B.KNN(k=k).fit(X[perm], y[perm]).rank(Q), base)
        if k == 1:
            i = int(g.integers(30))
            Xd, yd = np.vstack([X, X[i]]), np.append(y, y[i])
            np.testing.assert_array_equal(B.KNN(k=1).fit(Xd, yd).predict(Q), base[:, 0])

    def test_brute_force_oracle(self):
        g = np.random.Generator(np.random.PCG64(7))
        X, y = g.standard_normal((40, 2)), g.integers(0, 4, 40)
        Q = g.standard_normal((15, 2))
        m = B.KNN(k=5).fit(X, y)
        for q, got in zip(Q, m.predict(Q)):
            d = np.linalg.norm(X - q, axis=1)
            nn = np.argsort(d)[:5]
            best = max(set(y[nn].tolist()),
                       key=lambda c: (np.sum(y[nn] == c), -d[nn][y[nn] == c].mean(), -c))
            assert got == best


class TestKMeans:
    def test_distinct_points(self):
        X = np.array([[0.0, 0.0], [3.0, 1.0], [-2.0, 5.0]])
        r = B.kmeans(X, 3, seed=1)
        assert r.inertia == 0.0
        assert sorted(map(tuple, r.centers)) == sorted(map(tuple, X))

    def test_two_blobs(self):
        g = np.random.Generator(np.random.PCG64(0))
        a = g.normal([0, 0], 0.1, (200, 2))
        b = g.normal([10, 10], 0.1, (200, 2))
        r = B.kmeans(np.vstack([a, b]), 2, seed=3)
        c = sorted(map(tuple, r.centers))
        tol = 3 * 0.1 / np.sqrt(200)
        np.testing.assert_allclose(c[0], [0, 0], atol=tol)
        np.testing.assert_allclose(c[1], [10, 10], atol=tol)
        assert r.converged

    @settings(max_examples=40)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 6))
    def test_monotone_and_fixpoint(self, seed, k):
        g = np.random.Generator(np.random.PCG64(seed))
        X = g.standard_normal((60, 3))
        r = B.kmeans(X, k, seed=seed)
        h = r.inertia_history
        assert all(b <= a + 1e-9 for a, b in zip(h, h[1:]))
        assert np.bincount(r.assign, minlength=k).min() >= 1
        if r.converged:
            np.testing.assert_array_equal(r.predict(X), r.assign)

    def test_deterministic(self):
        X = np.random.Generator(np.random.PCG64(1)).standard_normal((100, 4))
        a, b = B.kmeans(X, 4, seed=5), B.kmeans(X, 4, seed=5)
        np.testing.assert_array_equal(a.centers, b.centers)

    def test_errors(self):
        with pytest.raises(ValueError):
            B.kmeans(np.zeros((2, 2)), 3)
        with pytest.raises(ValueError):
            B.kmeans(np.zeros((2, 2)), 0)

    def test_duplicate_points_fill_clusters(self):
        X = np.vstack([np.zeros((10, 2)), [[1.0, 1.0]]])
        r = B.kmeans(X, 3, seed=0)
        assert np.bincount(r.assign, minlength=3).min() >= 1


class TestClusterReport:
    def test_perfect(self):
        rep = B.cluster_report([2, 2, 0, 1], [0, 0, 1, 2], 3)
        assert (np.count_nonzero(rep.matrix, axis=0) == 1).all()
        assert (np.count_nonzero(rep.matrix, axis=1) == 1).all()
        assert not rep.failed and rep.summary() == "no split or merged classes"

    def test_split_even(self):
        rep = B.cluster_report([0, 1, 0, 1, 2, 2], [0, 0, 0, 0, 1, 1], 3)
        assert rep.matrix[0, 0] == rep.matrix[0, 1] == 2
        assert rep.split_classes == [0] and rep.failed
        assert "class 0 split across clusters [0, 1]" in rep.summary()

    def test_merged(self):
        rep = B.cluster_report([0, 0, 0, 0], [0, 0, 1, 1], 2)
        assert rep.merged_clusters == {0: [0, 1]}

    def test_row_sums_and_tsv(self):
        truths = [0, 1, 1, 2, 2, 2]
        rep = B.cluster_report([0, 1, 0, 2, 1, 0], truths, 3)
        assert rep.matrix.sum(axis=1).tolist() == [1, 2, 3]
        assert rep.to_tsv().splitlines()[0] == "\t0\t1\t2"

    def test_from_model(self):
        X = np.array([[0.0], [0.1], [5.0], [5.1]])
        r = B.kmeans(X, 2, seed=0)
        rep = B.kmeans_confusion(r, X, [0, 0, 1, 1])
        assert not rep.failed
