use std::collections::BTreeMap;

use super::{BasisFactor, GeometryFactor, Monomial, MonomialSum, RefIndex};

/// Above this many bound indices the renaming search is skipped and
/// monomials are only sorted (still value-preserving, merges less).
const MAX_PERMUTED_INDICES: u8 = 6;

type Key = (Vec<BasisFactor>, Vec<GeometryFactor>, Vec<BasisFactor>, u8);

fn permutations(n: usize) -> Vec<Vec<u8>> {
    fn rec(prefix: &mut Vec<u8>, used: &mut [bool], out: &mut Vec<Vec<u8>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for k in 0..used.len() {
            if !used[k] {
                used[k] = true;
                prefix.push(k as u8);
                rec(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

fn renamed_key(m: &Monomial, perm: &[u8]) -> Key {
    let map = |r: RefIndex| match r {
        RefIndex::Bound(b) => RefIndex::Bound(perm[b as usize]),
        fixed => fixed,
    };
    let map_factor = |f: &BasisFactor| {
        let mut deriv: Vec<RefIndex> = f.deriv.iter().map(|&d| map(d)).collect();
        deriv.sort_unstable();
        BasisFactor {
            role: f.role,
            component: f.component,
            deriv,
        }
    };
    let mut basis: Vec<BasisFactor> = m.basis.iter().map(map_factor).collect();
    basis.sort();
    let mut geometry: Vec<GeometryFactor> = m
        .geometry
        .iter()
        .map(|g| match *g {
            GeometryFactor::Jinv { reference, physical } => GeometryFactor::Jinv {
                reference: map(reference),
                physical,
            },
            GeometryFactor::Det => GeometryFactor::Det,
        })
        .collect();
    geometry.sort();
    let mut denominators: Vec<BasisFactor> = m.denominators.iter().map(map_factor).collect();
    denominators.sort();
    (basis, geometry, denominators, m.bound)
}

/// Canonical key: the smallest factor ordering over all renamings of the
/// bound indices.
fn canonical_key(m: &Monomial) -> Key {
    let n = m.bound;
    if n == 0 || n > MAX_PERMUTED_INDICES {
        let identity: Vec<u8> = (0..n).collect();
        return renamed_key(m, &identity);
    }
    permutations(n as usize)
        .iter()
        .map(|p| renamed_key(m, p))
        .min()
        .expect("at least one permutation")
}

/// Merges monomials equal up to their constant and bound-index names, drops
/// zero constants, and orders factors and monomials canonically.
pub fn simplify(ms: &MonomialSum) -> MonomialSum {
    let mut merged: BTreeMap<Key, f64> = BTreeMap::new();
    for m in &ms.monomials {
        *merged.entry(canonical_key(m)).or_insert(0.0) += m.constant;
    }
    let monomials = merged
        .into_iter()
        .filter(|(_, c)| *c != 0.0)
        .map(|((basis, geometry, denominators, bound), constant)| Monomial {
            constant,
            basis,
            geometry,
            denominators,
            bound,
        })
        .collect();
    MonomialSum {
        monomials,
        elements: ms.elements.clone(),
    }
}
