#!/usr/bin/env python3
"""Regenerate the integral fixture corpus with PySCF.

    pip install pyscf
    python3 fixtures/generate_fixtures.py            # writes into fixtures/

Every fixture holds spatial-orbital integrals in chemist notation, (ij|kl),
over the active orbitals only. Frozen (doubly occupied) orbitals are folded
into the one-body term and the scalar constant; removed (virtual) orbitals
are dropped. The constant is nuclear repulsion plus the frozen-core energy.
Spatial orbitals keep PySCF's canonical RHF order (ascending orbital energy)
and PySCF's MO sign convention; the spin-orbital layout is chosen at load
time (blocked alpha-then-beta unless stated otherwise).
"""
import hashlib
import json
import os
import sys

import numpy as np
from pyscf import ao2mo, fci, gto, mcscf, scf, symm
from pyscf.tools import fcidump

ROOT = os.path.dirname(os.path.abspath(__file__))
TOL = 1e-12


def active_integrals(atom, basis, frozen=(), removed=(), symmetry=False):
    mol = gto.M(atom=atom, basis=basis, unit="Angstrom", verbose=0, symmetry=symmetry)
    mf = scf.RHF(mol).run(conv_tol=1e-12)
    norb = mf.mo_coeff.shape[1]
    if callable(removed):
        removed = removed(mol, mf)
    active = [i for i in range(norb) if i not in frozen and i not in removed]
    nelec = mol.nelectron - 2 * len(frozen)
    mc = mcscf.CASCI(mf, len(active), nelec)
    mo = mc.sort_mo([i + 1 for i in active])
    h1, ecore = mc.get_h1eff(mo)
    eri = ao2mo.restore(1, mc.get_h2eff(mo), len(active))
    e_fci, _ = fci.direct_spin1.kernel(h1, eri, len(active), nelec, ecore=ecore, conv_tol=1e-12)
    return dict(
        h1=np.asarray(h1), eri=np.asarray(eri), ecore=float(ecore), nelec=nelec,
        nmo=len(active), e_hf=float(mf.e_tot), e_fci=float(e_fci),
        e_nuc=float(mol.energy_nuc()), frozen=list(frozen), removed=list(removed),
    )


def write_json(path, d, meta):
    n = d["nmo"]
    one = [[p, q, float(d["h1"][p, q])] for p in range(n) for q in range(n) if abs(d["h1"][p, q]) >= TOL]
    two = [
        [p, q, r, s, float(d["eri"][p, q, r, s])]
        for p in range(n) for q in range(n) for r in range(n) for s in range(n)
        if abs(d["eri"][p, q, r, s]) >= TOL
    ]
    meta = dict(meta)
    meta.update(
        n_electrons=d["nelec"], nuclear_repulsion=d["e_nuc"], hf_energy=d["e_hf"],
        fci_energy=d["e_fci"], frozen_orbitals=d["frozen"], removed_orbitals=d["removed"],
        spatial_order="pyscf RHF canonical orbitals, ascending energy",
    )
    doc = {
        "n_spatial": n,
        "convention": "chemist",
        "constant": d["ecore"],
        "one_body": one,
        "two_body": two,
        "metadata": meta,
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def write_fcidump(path, d):
    fcidump.from_integrals(path, d["h1"], d["eri"], d["nmo"], d["nelec"], nuc=d["ecore"], ms=0, tol=TOL)


def lih_removed(mol, mf):
    # drop the first virtual pi orbital (2p_y of Li)
    labels = symm.label_orb_symm(mol, mol.irrep_name, mol.symm_orb, mf.mo_coeff)
    nocc = mol.nelectron // 2
    for i, lab in enumerate(labels):
        if i >= nocc and lab.startswith("E1"):
            return [i]
    raise RuntimeError("no pi orbital found")


def grid(lo, hi, step):
    n = int(round((hi - lo) / step))
    return [round(lo + i * step, 4) for i in range(n + 1)]


# ibmq_santiago calibration, qubits 0-4: single-qubit gate error, P(0|1), P(1|0).
SANTIAGO_QUBITS = [
    (0.000228, 0.0204, 0.0086),
    (0.000183, 0.0142, 0.0126),
    (0.000217, 0.0166, 0.1434),
    (0.000262, 0.0420, 0.0252),
    (0.000174, 0.0148, 0.0030),
]
# (control, target, CNOT error, gate length ns)
SANTIAGO_CNOTS = [
    (0, 1, 0.00573, 526.22), (1, 0, 0.00573, 561.78),
    (1, 2, 0.00686, 604.44), (2, 1, 0.00686, 568.89),
    (2, 3, 0.00670, 376.89), (3, 2, 0.00670, 412.44),
    (3, 4, 0.00636, 376.89), (4, 3, 0.00636, 341.33),
]


def write_noise(path):
    model = dict(
        name="ibmq_santiago",
        qubits=[dict(single_qubit_error=e, p1_given_0=p10, p0_given_1=p01) for e, p01, p10 in SANTIAGO_QUBITS],
        couplings=[dict(control=c, target=t, cnot_error=e, gate_length_ns=ns) for c, t, e, ns in SANTIAGO_CNOTS],
    )
    with open(path, "w") as f:
        json.dump(model, f, indent=2)
        f.write("\n")


def main():
    out = []
    cmd = "python3 fixtures/generate_fixtures.py"

    d = active_integrals("H 0 0 0; H 0 0 0.735", "sto-3g")
    p = os.path.join(ROOT, "h2_sto3g_0.735.json")
    write_json(p, d, dict(molecule="H2", basis="STO-3G", bond_length_angstrom=0.735, generator=cmd))
    out.append(p)
    p = os.path.join(ROOT, "h2_sto3g_0.735.fcidump")
    write_fcidump(p, d)
    out.append(p)

    os.makedirs(os.path.join(ROOT, "h2_631g"), exist_ok=True)
    dists = sorted(set(grid(0.3, 2.8, 0.1) + grid(0.7, 0.8, 0.01) + [0.745]))
    for r in dists:
        d = active_integrals(f"H 0 0 0; H 0 0 {r}", "6-31g")
        p = os.path.join(ROOT, "h2_631g", f"h2_631g_{r:.3f}.json")
        write_json(p, d, dict(molecule="H2", basis="6-31G", bond_length_angstrom=r, generator=cmd))
        out.append(p)

    os.makedirs(os.path.join(ROOT, "lih_sto3g"), exist_ok=True)
    dists = sorted(set(grid(0.5, 4.0, 0.25) + grid(1.5, 1.6, 0.01)))
    for r in dists:
        d = active_integrals(f"Li 0 0 0; H 0 0 {r}", "sto-3g", frozen=[0], removed=lih_removed, symmetry=True)
        p = os.path.join(ROOT, "lih_sto3g", f"lih_sto3g_{r:.3f}.json")
        write_json(p, d, dict(molecule="LiH", basis="STO-3G", bond_length_angstrom=r, generator=cmd))
        out.append(p)

    # Term-count corpus, experimental equilibrium bond lengths (Angstrom).
    # Point-group symmetry is only used to locate the LiH pi orbital; the
    # other rows keep PySCF's unsymmetrized canonical orbitals, whose
    # degenerate-pair mixing fixes the number of nonzero integrals.
    os.makedirs(os.path.join(ROOT, "table3"), exist_ok=True)
    rows = [
        ("lih_f0_r3", "Li 0 0 0; H 0 0 1.595", [0], lih_removed),
        ("hf", "H 0 0 0; F 0 0 0.917", [], []),
        ("hf_f0", "H 0 0 0; F 0 0 0.917", [0], []),
        ("hcl_f0", "H 0 0 0; Cl 0 0 1.275", [0], []),
        ("hcl_f0-1", "H 0 0 0; Cl 0 0 1.275", [0, 1], []),
        ("hbr_f0-2", "H 0 0 0; Br 0 0 1.414", list(range(3)), []),
        ("hbr_f0-4", "H 0 0 0; Br 0 0 1.414", list(range(5)), []),
        ("f2_f0-1", "F 0 0 0; F 0 0 1.412", [0, 1], []),
        ("cl2_f0-1", "Cl 0 0 0; Cl 0 0 1.988", [0, 1], []),
        ("cl2_f0-9", "Cl 0 0 0; Cl 0 0 1.988", list(range(10)), []),
        ("br2_f0-27", "Br 0 0 0; Br 0 0 2.281", list(range(28)), []),
        ("i2_f0-45", "I 0 0 0; I 0 0 2.666", list(range(46)), []),
    ]
    for name, atom, frozen, removed in rows:
        d = active_integrals(atom, "sto-3g", frozen=frozen, removed=removed, symmetry=callable(removed))
        p = os.path.join(ROOT, "table3", f"{name}.fcidump")
        write_fcidump(p, d)
        out.append(p)
        print(name, d["nmo"], d["nelec"], file=sys.stderr)

    os.makedirs(os.path.join(ROOT, "noise"), exist_ok=True)
    p = os.path.join(ROOT, "noise", "santiago.json")
    write_noise(p)
    out.append(p)

    with open(os.path.join(ROOT, "SHA256SUMS"), "w") as f:
        for p in sorted(out):
            with open(p, "rb") as g:
                f.write(f"{hashlib.sha256(g.read()).hexdigest()}  {os.path.relpath(p, ROOT)}\n")


if __name__ == "__main__":
    main()
