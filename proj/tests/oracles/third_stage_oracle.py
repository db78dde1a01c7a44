"""Independent third-stage solve on the 14-bus case with scipy SLSQP.

Dispatch x comes from PYPOWER's runopf; branch 0 (bus 1-2) is half out, which
PYPOWER's makeYbus expresses as branch status 0.5 (scales series admittance and
charging alike). Prints the redispatch and the scaled contingency cost that the
unit tests freeze.
"""
import numpy as np
from scipy.optimize import minimize
from pypower.api import case14, runopf, ppoption
from pypower.ext2int import ext2int
from pypower.makeYbus import makeYbus
from pypower.dSbus_dV import dSbus_dV

COST_SCALE = 1e-3
RHO = 1e7
RAMP = 0.1
BAND = 0.02
BRANCH = 0
Y = 0.5

ppc = ext2int(case14())
res = runopf(case14(), ppoption(VERBOSE=0, OUT_ALL=0, OPF_VIOLATION=1e-10, PDIPM_GRADTOL=1e-12,
                                PDIPM_COMPTOL=1e-12, PDIPM_COSTTOL=1e-12))
base = ppc["baseMVA"]
bus, gen, branch, cost = ppc["bus"], ppc["gen"], ppc["branch"].copy(), ppc["gencost"]
n, ng = bus.shape[0], gen.shape[0]
gbus = gen[:, 0].astype(int)
slack = int(np.where(bus[:, 1] == 3)[0][0])
slack_gen = int(np.where(gbus == slack)[0][0])
x_p = res["gen"][:, 1] / base
x_v = res["gen"][:, 5]

branch[BRANCH, 10] = 1.0 - Y
Ybus, _, _ = makeYbus(base, bus, branch)
Ybus = Ybus.tocsc()
pd = bus[:, 2] / base
qd = bus[:, 3] / base
shunt = (bus[:, 4] + 1j * bus[:, 5]) / base

va_idx = [i for i in range(n) if i != slack]
nv = 2 * ng + n + len(va_idx) + 2 * n
o_pg, o_qg, o_vm, o_va, o_s = 0, ng, 2 * ng, 2 * ng + n, 2 * ng + n + len(va_idx)


def unpack(u):
    va = np.zeros(n)
    va[va_idx] = u[o_va:o_s]
    return u[o_pg:o_qg], u[o_qg:o_vm], u[o_vm:o_va], va, u[o_s:]


def objective(u):
    pg = u[o_pg:o_qg] * base
    c2, c1, c0 = cost[:, 4], cost[:, 5], cost[:, 6]
    s = u[o_s:]
    return COST_SCALE * np.sum(c2 * pg**2 + c1 * pg + c0) + 0.5 * RHO * s @ s


def objective_grad(u):
    g = np.zeros(nv)
    pg = u[o_pg:o_qg] * base
    g[o_pg:o_qg] = COST_SCALE * (2 * cost[:, 4] * pg + cost[:, 5]) * base
    g[o_s:] = RHO * u[o_s:]
    return g


def balance(u):
    pg, qg, vm, va, s = unpack(u)
    V = vm * np.exp(1j * va)
    S = V * np.conj(Ybus @ V)
    inj = np.zeros(n, complex)
    np.add.at(inj, gbus, pg + 1j * qg)
    mis = inj - (pd + 1j * qd) - S
    return np.concatenate([mis.real + s[:n], mis.imag + s[n:]])


def balance_jac(u):
    _, _, vm, va, _ = unpack(u)
    V = vm * np.exp(1j * va)
    dS_dVm, dS_dVa = dSbus_dV(Ybus, V)
    dS_dVm, dS_dVa = dS_dVm.toarray(), dS_dVa.toarray()
    J = np.zeros((2 * n, nv))
    for g in range(ng):
        J[gbus[g], o_pg + g] = 1.0
        J[n + gbus[g], o_qg + g] = 1.0
    J[:n, o_vm:o_va] = -dS_dVm.real
    J[n:, o_vm:o_va] = -dS_dVm.imag
    J[:n, o_va:o_s] = -dS_dVa.real[:, va_idx]
    J[n:, o_va:o_s] = -dS_dVa.imag[:, va_idx]
    J[:, o_s:] = np.eye(2 * n)
    return J


bounds = []
for g in range(ng):
    pmin, pmax = gen[g, 9] / base, gen[g, 8] / base
    if g == slack_gen:
        bounds.append((pmin, pmax))
    else:
        bounds.append((max(pmin, x_p[g] - RAMP * pmax), min(pmax, x_p[g] + RAMP * pmax)))
bounds += [(gen[g, 4] / base, gen[g, 3] / base) for g in range(ng)]
for i in range(n):
    lo, hi = bus[i, 12], bus[i, 11]
    if i in gbus:
        g = int(np.where(gbus == i)[0][0])
        lo, hi = max(lo, x_v[g] - BAND), min(hi, x_v[g] + BAND)
    bounds.append((lo, hi))
bounds += [(None, None)] * (len(va_idx) + 2 * n)

u0 = np.zeros(nv)
u0[o_pg:o_qg] = res["gen"][:, 1] / base
u0[o_qg:o_vm] = res["gen"][:, 2] / base
u0[o_vm:o_va] = res["bus"][:, 7]
u0[o_va:o_s] = np.deg2rad(res["bus"][va_idx, 8])
u0 = np.clip(u0, [b[0] if b[0] is not None else -np.inf for b in bounds],
             [b[1] if b[1] is not None else np.inf for b in bounds])

sol = minimize(objective, u0, jac=objective_grad, bounds=bounds, method="SLSQP",
               constraints=[{"type": "eq", "fun": balance, "jac": balance_jac}],
               options={"ftol": 1e-15, "maxiter": 2000})
pg, qg, vm, va, s = unpack(sol.x)
f_cont = COST_SCALE * np.sum(cost[:, 4] * (pg * base) ** 2 + cost[:, 5] * pg * base + cost[:, 6])
np.set_printoptions(precision=17)
print("success", sol.success, sol.message)
print("max balance residual", np.abs(balance(sol.x)).max())
print("pg", repr(pg))
print("vm at generator buses", repr(vm[gbus]))
print("slack inf norm", np.abs(s).max())
print("f_cont", repr(f_cont))
print("objective", repr(sol.fun))
