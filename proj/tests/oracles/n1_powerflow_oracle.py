"""Post-outage power flows of the 14-bus case at PYPOWER's OPF dispatch.

For every single in-service branch outage that keeps the network connected,
runs runpf with the OPF set points and reports whether the result respects
bus voltage limits and every generator's P and Q limits. A branch passing all
checks is a mild outage: the dispatch is feasible without redispatch.
"""
import numpy as np
from pypower.api import case14, runopf, runpf, ppoption

quiet = dict(VERBOSE=0, OUT_ALL=0)
opf = runopf(case14(), ppoption(**quiet))
for j in range(opf["branch"].shape[0]):
    ppc = case14()
    ppc["gen"][:, 1] = opf["gen"][:, 1]
    ppc["gen"][:, 5] = opf["gen"][:, 5]
    ppc["branch"][j, 10] = 0
    r, ok = runpf(ppc, ppoption(ENFORCE_Q_LIMS=0, **quiet))
    if not ok:
        print(j, "diverged")
        continue
    vm = r["bus"][:, 7]
    v_ok = np.all(vm <= r["bus"][:, 11] + 1e-9) and np.all(vm >= r["bus"][:, 12] - 1e-9)
    g = r["gen"]
    p_ok = np.all(g[:, 1] <= g[:, 8] + 1e-6) and np.all(g[:, 1] >= g[:, 9] - 1e-6)
    q_ok = np.all(g[:, 2] <= g[:, 3] + 1e-6) and np.all(g[:, 2] >= g[:, 4] - 1e-6)
    fb, tb = int(ppc["branch"][j, 0]), int(ppc["branch"][j, 1])
    print(j, f"{fb}-{tb}", "mild" if v_ok and p_ok and q_ok else "violating",
          f"slack P {g[0, 1]:.3f} MW, vm range [{vm.min():.4f}, {vm.max():.4f}]")
