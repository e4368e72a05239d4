"""Independent fingerprint and parser oracle.

RDKit supplies the molecular graph (atoms, bonds, hydrogen counts, ring
membership). Everything downstream of the graph -- the MurmurHash3 word
hash, atom invariants, update rounds, bond-set deduplication and folding --
is written here from the algorithm description, without reference to the
Rust sources.

    python3 tools/oracles/ecfp_oracle.py corpus  > crates/core/tests/fixtures/drug_corpus.tsv
    python3 tools/oracles/ecfp_oracle.py golden  > crates/core/tests/fixtures/golden_ecfp.tsv
    python3 tools/oracles/ecfp_oracle.py permute > crates/core/tests/fixtures/permuted_pairs.tsv
    python3 tools/oracles/ecfp_oracle.py malformed crates/core/tests/fixtures/malformed_smiles.tsv
"""

import random
import struct
import sys

from rdkit import Chem, RDLogger

RDLogger.DisableLog("rdApp.*")

from corpus import DRUGS  # noqa: E402

MASK = 0xFFFFFFFF


def rotl(x, r):
    return ((x << r) | (x >> (32 - r))) & MASK


def murmur3_32(data: bytes, seed: int = 0) -> int:
    c1, c2 = 0xCC9E2D51, 0x1B873593
    h = seed
    n = len(data) // 4
    for i in range(n):
        (k,) = struct.unpack_from("<I", data, 4 * i)
        k = rotl((k * c1) & MASK, 15) * c2 & MASK
        h ^= k
        h = (rotl(h, 13) * 5 + 0xE6546B64) & MASK
    tail = data[4 * n :]
    if tail:
        k = 0
        for i, b in enumerate(tail):
            k |= b << (8 * i)
        k = rotl((k * c1) & MASK, 15) * c2 & MASK
        h ^= k
    h ^= len(data)
    h ^= h >> 16
    h = (h * 0x85EBCA6B) & MASK
    h ^= h >> 13
    h = (h * 0xC2B2AE35) & MASK
    h ^= h >> 16
    return h


def hash_words(words):
    return murmur3_32(b"".join(struct.pack("<I", w & MASK) for w in words))


ORDER_CODE = {
    Chem.BondType.SINGLE: 1,
    Chem.BondType.DOUBLE: 2,
    Chem.BondType.TRIPLE: 3,
    Chem.BondType.AROMATIC: 4,
}
ORDER_VALENCE = {1: 1, 2: 2, 3: 3, 4: 1}
PI_ELEMENTS = {5, 6, 7, 15}


def graph(smiles):
    """Largest fragment by heavy atoms, aromaticity exactly as written."""
    mol = Chem.MolFromSmiles(smiles, sanitize=False)
    if mol is None:
        raise ValueError(smiles)
    mol.UpdatePropertyCache(strict=False)
    Chem.FastFindRings(mol)
    frags = Chem.GetMolFrags(mol, asMols=False, sanitizeFrags=False)
    keep = max(frags, key=lambda f: sum(mol.GetAtomWithIdx(i).GetAtomicNum() > 1 for i in f))
    keep = set(keep)
    atoms = [a for a in mol.GetAtoms() if a.GetIdx() in keep]
    return mol, atoms


def total_h(atom):
    return atom.GetTotalNumHs(includeNeighbors=True)


def invariants(mol, atom):
    heavy = [b for b in atom.GetBonds() if b.GetOtherAtom(atom).GetAtomicNum() > 1]
    valence = sum(ORDER_VALENCE[ORDER_CODE[b.GetBondType()]] for b in heavy)
    if atom.GetIsAromatic() and atom.GetAtomicNum() in PI_ELEMENTS:
        valence += 1
    return [
        len(heavy),
        valence,
        atom.GetAtomicNum(),
        atom.GetIsotope(),
        atom.GetFormalCharge(),
        total_h(atom),
        int(mol.GetRingInfo().NumAtomRings(atom.GetIdx()) > 0),
    ]


def surviving(smiles, radius):
    mol, atoms = graph(smiles)
    heavy = [a for a in atoms if a.GetAtomicNum() > 1] or atoms
    ids = {a.GetIdx(): (hash_words(invariants(mol, a)), frozenset()) for a in heavy}
    feats = [(0, v, bs, i) for i, (v, bs) in ids.items()]
    for it in range(1, radius + 1):
        nxt = {}
        for i, (v, bs) in ids.items():
            a = mol.GetAtomWithIdx(i)
            nbrs, bonds = [], set(bs)
            for b in a.GetBonds():
                j = b.GetOtherAtomIdx(i)
                if j not in ids:
                    continue
                nbrs.append((ORDER_CODE[b.GetBondType()], ids[j][0]))
                bonds.add(b.GetIdx())
                bonds |= ids[j][1]
            words = [it, v]
            for code, nid in sorted(nbrs):
                words += [code, nid]
            nxt[i] = (hash_words(words), frozenset(bonds))
        ids = nxt
        feats += [(it, v, bs, i) for i, (v, bs) in ids.items()]
    best = {}
    for it, v, bs, centre in feats:
        key = ("atom", centre) if not bs else ("bonds", bs)
        if key not in best or (it, v) < best[key][:2]:
            best[key] = (it, v)
    return sorted(best.values())


def bits(smiles, radius, width):
    return sorted({v % width for _, v in surviving(smiles, radius)})


def corpus():
    print("# name\tsmiles\tatoms\tbonds\timplicit_h\ttotal_h")
    for name, smi in DRUGS:
        mol, atoms = graph(smi)
        idx = {a.GetIdx() for a in atoms}
        nb = sum(1 for b in mol.GetBonds() if b.GetBeginAtomIdx() in idx)
        imp = sum(a.GetNumImplicitHs() for a in atoms)
        tot = sum(total_h(a) for a in atoms)
        print(f"{name}\t{smi}\t{len(atoms)}\t{nb}\t{imp}\t{tot}")


def golden():
    print("# SMILES\tradius\twidth\tbits")
    for _, smi in DRUGS:
        for radius, width in [(0, 1024), (1, 1024), (2, 1024), (2, 256)]:
            print(f"{smi}\t{radius}\t{width}\t{','.join(map(str, bits(smi, radius, width)))}")


def permute():
    """Randomized atom orderings written by RDKit, checked here to give the
    same oracle fingerprint before they are accepted."""
    rng = random.Random(20261018)
    print("# original\tpermuted")
    out = 0
    while out < 50:
        _, smi = DRUGS[out % len(DRUGS)]
        m = Chem.MolFromSmiles(smi)
        order = list(range(m.GetNumAtoms()))
        rng.shuffle(order)
        perm = Chem.MolToSmiles(Chem.RenumberAtoms(m, order), canonical=False, kekuleSmiles=False)
        if perm == smi or bits(perm, 2, 1024) != bits(smi, 2, 1024):
            raise SystemExit(f"bad permutation for {smi}: {perm}")
        print(f"{smi}\t{perm}")
        out += 1




def malformed(path):
    """Every malformed fixture must also be rejected by RDKit."""
    for line in open(path):
        if line.startswith("#") or not line.strip("\n"):
            continue
        smi, _ = line.rstrip("\n").split("\t")
        if smi and Chem.MolFromSmiles(smi) is not None:
            raise SystemExit(f"RDKit accepts {smi!r}")
    print("all rejected")


if __name__ == "__main__":
    if sys.argv[1] == "malformed":
        malformed(sys.argv[2])
    else:
        {"corpus": corpus, "golden": golden, "permute": permute}[sys.argv[1]]()
