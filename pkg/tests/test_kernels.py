import numpy as np
import pytest

from looptune import _pyloop, kernels


def _literal_rk4(A, b, x, u, dt):
    """Four explicit stages, the reference for the precomputed transition."""
    def f(xv):
        return A @ xv + b * u
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def test_rk4_transition_equals_four_stages():
    rng = np.random.default_rng(0)
    for n in (1, 2, 3, 5):
        A = rng.normal(size=(n, n)) - n * np.eye(n)
        b = rng.normal(size=n)
        dt = 0.05
        m, nb = kernels.rk4_input_map(A, b.reshape(-1, 1), dt)
        x = rng.normal(size=n)
        u = rng.normal()
        got = m @ x + nb * u
        want = _literal_rk4(A, b, x, u, dt)
        assert np.allclose(got, want, rtol=1e-13, atol=1e-15)


def test_rk4_transition_static_system():
    m, nb = kernels.rk4_input_map(np.zeros((0, 0)), np.zeros((0, 1)), 0.1)
    assert m.shape == (0, 0)
    assert nb.shape == (0,)


def test_lti_filter_delay_semantics():
    # pure integrator x' = u, y = x at dt = 1: y[k] = sum of inputs before k
    m, nb = kernels.rk4_input_map(np.array([[0.0]]), np.array([[1.0]]), 1.0)
    u = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
    y = kernels.lti_filter(m, nb, np.array([1.0]), 0.0, u, 0)
    assert np.array_equal(y, [0.0, 1.0, 1.0, 1.0, 1.0])
    y2 = kernels.lti_filter(m, nb, np.array([1.0]), 0.0, u, 2)
    assert np.array_equal(y2, [0.0, 0.0, 0.0, 1.0, 1.0])


def test_lti_filter_feedthrough_only():
    m = np.zeros((0, 0))
    nb = np.zeros(0)
    u = np.array([0.0, 1.0, 2.0, 3.0])
    y = kernels.lti_filter(m, nb, np.zeros(0), 2.0, u, 1)
    assert np.array_equal(y, [0.0, 0.0, 2.0, 4.0])


def _random_closed_loop_case(rng, n_steps=400):
    q = p = 2
    entries = []
    for i in range(q):
        for j in range(p):
            if rng.random() < 0.3 and i != j:
                continue
            n = rng.integers(1, 3)
            A = -np.diag(rng.uniform(0.5, 2.0, size=n))
            B = rng.normal(size=(n, 1))
            m, nb = kernels.rk4_input_map(A, B, 0.05)
            c = rng.normal(size=n)
            entries.append((i, j, m, nb, c, 0.0, int(rng.integers(0, 8))))
    loops = [(0, 0, 0.5, 0.1, -5.0, 5.0), (1, 1, -0.4, -0.05, -4.0, 4.0)]
    u_ss = np.array([1.0, 2.0])
    z_ss = np.array([0.5, -0.5])
    sp = np.tile(z_ss, (n_steps, 1))
    sp[n_steps // 4:, 0] += 0.3
    sp[n_steps // 2:, 1] -= 0.2
    u_open = np.tile(u_ss, (n_steps, 1))
    return entries, loops, u_ss, z_ss, sp, u_open


def test_backends_agree():
    if kernels.BACKEND != "c":
        pytest.skip("compiled backend not available")
    rng = np.random.default_rng(42)
    entries, loops, u_ss, z_ss, sp, u_open = _random_closed_loop_case(rng)
    out_c = kernels.closed_loop(entries, loops, u_ss, z_ss, sp, u_open,
                                0.05, sp.shape[0])

    # rebuild the packed arguments and call the pure-Python twin directly
    import looptune.kernels as K
    saved = K._impl
    try:
        K._impl = _pyloop
        out_py = kernels.closed_loop(entries, loops, u_ss, z_ss, sp, u_open,
                                     0.05, sp.shape[0])
    finally:
        K._impl = saved
    for a, b in zip(out_c, out_py):
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_lti_filter_backends_agree():
    if kernels.BACKEND != "c":
        pytest.skip("compiled backend not available")
    rng = np.random.default_rng(17)
    A = np.array([[-0.3, 1.0], [0.0, -0.6]])
    m, nb = kernels.rk4_input_map(A, np.array([[0.0], [1.0]]), 0.1)
    c = np.array([1.0, 0.5])
    u = rng.normal(size=300)
    y_c = kernels.lti_filter(m, nb, c, 0.2, u, 3)
    y_py = _pyloop.lti_filter(m, nb, c, 0.2, u, 3)
    assert np.allclose(y_c, y_py, rtol=1e-13, atol=1e-15)
