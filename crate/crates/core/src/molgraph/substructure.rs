use super::Molecule;

pub(super) fn contains(target: &Molecule, pattern: &Molecule) -> bool {
    let n = pattern.atom_count();
    if n == 0 {
        return true;
    }
    if n > target.atom_count() {
        return false;
    }
    // breadth-first visit order so every atom after the first (per fragment)
    // has an already-mapped neighbor
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    for start in 0..n {
        if placed[start] {
            continue;
        }
        placed[start] = true;
        order.push(start);
        let mut head = order.len() - 1;
        while head < order.len() {
            let a = order[head];
            head += 1;
            for &(nb, _) in pattern.neighbors(a) {
                if !placed[nb] {
                    placed[nb] = true;
                    order.push(nb);
                }
            }
        }
    }
    let mut mapping = vec![usize::MAX; n];
    let mut used = vec![false; target.atom_count()];
    extend(target, pattern, &order, 0, &mut mapping, &mut used)
}

fn extend(
    target: &Molecule,
    pattern: &Molecule,
    order: &[usize],
    k: usize,
    mapping: &mut [usize],
    used: &mut [bool],
) -> bool {
    let Some(&p) = order.get(k) else {
        return true;
    };
    let pa = &pattern.atoms()[p];
    let anchor = pattern
        .neighbors(p)
        .iter()
        .find(|(q, _)| mapping[*q] != usize::MAX)
        .map(|(q, _)| mapping[*q]);
    let candidates: Vec<usize> = match anchor {
        Some(t) => target.neighbors(t).iter().map(|(n, _)| *n).collect(),
        None => (0..target.atom_count()).collect(),
    };
    for t in candidates {
        let ta = &target.atoms()[t];
        if used[t] || ta.element != pa.element || ta.aromatic != pa.aromatic {
            continue;
        }
        let bonds_agree = pattern.neighbors(p).iter().all(|&(q, b)| {
            mapping[q] == usize::MAX
                || target
                    .bond_between(t, mapping[q])
                    .is_some_and(|tb| tb.order == pattern.bonds()[b].order)
        });
        if !bonds_agree {
            continue;
        }
        mapping[p] = t;
        used[t] = true;
        if extend(target, pattern, order, k + 1, mapping, used) {
            return true;
        }
        mapping[p] = usize::MAX;
        used[t] = false;
    }
    false
}
