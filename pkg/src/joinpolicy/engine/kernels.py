"""Hot inner loops for policy simulation.

Each kernel advances one run epoch by epoch: pick a source, consume the
next label from that source's stream, update label counts, the match
count, and the two accumulated scores (Kahan-compensated so that drift
over 10^6 steps stays far below the 1e-9 state-invariant tolerance).

The kernels are compiled with numba's @njit by default.  Setting the
environment variable ``JOINPOLICY_NO_NUMBA=1`` (or a failed numba import)
selects the pure-Python fallbacks, which execute the identical statements
and therefore produce bit-identical output.  ``benchmarks/bench_kernels.py``
compares the two paths.

Policy codes: 0 alternating, 1 greedy (offset via delta), 2 bernoulli,
3 restorative.  Tie modes: 0 prefer R, 1 prefer S, 2 alternate from R,
3 random (compare tie_u[k] against tie_p).
"""

from __future__ import annotations

import os

import numpy as np

ALTERNATING, GREEDY, BERNOULLI, RESTORATIVE = 0, 1, 2, 3


def _policy_run_impl(policy_code, delta, alpha, alpha1, alpha2,
                     tie_mode, tie_p,
                     labels_r, labels_s, x_r, x_s, coin_u, tie_u,
                     out_choice, out_label, out_r, out_m, out_gr, out_gs):
    n = out_choice.shape[0]
    k_support = x_r.shape[0]
    cnt_r = np.zeros(k_support, dtype=np.int64)
    cnt_s = np.zeros(k_support, dtype=np.int64)
    r_cnt = 0
    s_cnt = 0
    m = 0
    gr = 0.0
    cr = 0.0
    gs = 0.0
    cs = 0.0
    for k in range(n):
        epoch = k + 1
        if policy_code == 0:
            choice = 1 if epoch % 2 == 1 else 0
        elif policy_code == 1:
            lhs = gs
            rhs = gr + delta
            if lhs > rhs:
                choice = 1
            elif lhs < rhs:
                choice = 0
            elif tie_mode == 0:
                choice = 1
            elif tie_mode == 1:
                choice = 0
            elif tie_mode == 2:
                choice = 1 if epoch % 2 == 1 else 0
            else:
                choice = 1 if tie_u[k] < tie_p else 0
        elif policy_code == 2:
            choice = 1 if coin_u[k] < alpha else 0
        else:
            if epoch == 1:
                choice = 1
            else:
                if r_cnt >= alpha * (epoch - 1):
                    a = alpha1
                else:
                    a = alpha2
                choice = 1 if coin_u[k] < a else 0
        if choice == 1:
            label = labels_r[r_cnt]
            m += cnt_s[label]
            cnt_r[label] += 1
            r_cnt += 1
            y = x_r[label] - cr
            t = gr + y
            cr = (t - gr) - y
            gr = t
        else:
            label = labels_s[s_cnt]
            m += cnt_r[label]
            cnt_s[label] += 1
            s_cnt += 1
            y = x_s[label] - cs
            t = gs + y
            cs = (t - gs) - y
            gs = t
        out_choice[k] = choice
        out_label[k] = label
        out_r[k] = r_cnt
        out_m[k] = m
        out_gr[k] = gr
        out_gs[k] = gs


def _coupled_run_impl(tie_mode, tie_p,
                      labels_r, labels_s, x_r, x_s, tie_u,
                      out_choice_g, out_rg, out_mg, out_ma,
                      out_gr, out_gs):
    """Greedy and alternating driven by the same per-source label streams.

    The j-th R-read sees labels_r[j-1] under both policies; likewise for S.
    """
    n = out_choice_g.shape[0]
    k_support = x_r.shape[0]
    g_cnt_r = np.zeros(k_support, dtype=np.int64)
    g_cnt_s = np.zeros(k_support, dtype=np.int64)
    a_cnt_r = np.zeros(k_support, dtype=np.int64)
    a_cnt_s = np.zeros(k_support, dtype=np.int64)
    g_r = 0
    g_s = 0
    a_r = 0
    a_s = 0
    mg = 0
    ma = 0
    gr = 0.0
    cr = 0.0
    gs = 0.0
    cs = 0.0
    for k in range(n):
        epoch = k + 1
        # greedy step
        if gs > gr:
            choice = 1
        elif gs < gr:
            choice = 0
        elif tie_mode == 0:
            choice = 1
        elif tie_mode == 1:
            choice = 0
        elif tie_mode == 2:
            choice = 1 if epoch % 2 == 1 else 0
        else:
            choice = 1 if tie_u[k] < tie_p else 0
        if choice == 1:
            label = labels_r[g_r]
            mg += g_cnt_s[label]
            g_cnt_r[label] += 1
            g_r += 1
            y = x_r[label] - cr
            t = gr + y
            cr = (t - gr) - y
            gr = t
        else:
            label = labels_s[g_s]
            mg += g_cnt_r[label]
            g_cnt_s[label] += 1
            g_s += 1
            y = x_s[label] - cs
            t = gs + y
            cs = (t - gs) - y
            gs = t
        # alternating step on the same streams
        if epoch % 2 == 1:
            lab = labels_r[a_r]
            ma += a_cnt_s[lab]
            a_cnt_r[lab] += 1
            a_r += 1
        else:
            lab = labels_s[a_s]
            ma += a_cnt_r[lab]
            a_cnt_s[lab] += 1
            a_s += 1
        out_choice_g[k] = choice
        out_rg[k] = g_r
        out_mg[k] = mg
        out_ma[k] = ma
        out_gr[k] = gr
        out_gs[k] = gs


def _want_numba() -> bool:
    flag = os.environ.get("JOINPOLICY_NO_NUMBA", "").strip().lower()
    return flag not in ("1", "true", "yes", "on")


USING_NUMBA = False
policy_run = _policy_run_impl
coupled_run = _coupled_run_impl

if _want_numba():
    try:
        from numba import njit
    except ImportError:
        pass
    else:
        policy_run = njit(cache=True, nogil=True)(_policy_run_impl)
        coupled_run = njit(cache=True, nogil=True)(_coupled_run_impl)
        USING_NUMBA = True
