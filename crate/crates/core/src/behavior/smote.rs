use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BehaviorError, LabeledTable};
use crate::par;

pub const DEFAULT_K: usize = 5;

/// Oversampled table plus, for every synthetic row, the two original rows
/// it was interpolated between.
#[derive(Debug, Clone, PartialEq)]
pub struct Smoted {
    /// Original rows first, in their original order, then synthetic rows
    /// grouped by ascending class.
    pub table: LabeledTable,
    pub original_len: usize,
    /// `(base, neighbor)` indices into the original rows, one per synthetic row.
    pub origins: Vec<(usize, usize)>,
}

/// Tops up every class below `target` rows with SMOTE samples; larger
/// classes are left alone.
pub fn smote(
    table: &LabeledTable,
    target: usize,
    k: usize,
    seed: u64,
) -> Result<LabeledTable, BehaviorError> {
    smote_with_origins(table, target, k, seed).map(|s| s.table)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` nearest same-class rows of `members[i]`, nearest first, ties by
/// position in `members`.
fn neighbors(table: &LabeledTable, members: &[usize], i: usize, k: usize) -> Vec<usize> {
    let me = &table.rows[members[i]];
    let mut d: Vec<(f64, usize)> = members
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, &row)| (dist2(me, &table.rows[row]), j))
        .collect();
    let k = k.min(d.len());
    if k < d.len() {
        d.select_nth_unstable_by(k, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.truncate(k);
    }
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().map(|(_, j)| members[j]).collect()
}

/// Each class draws from its own random stream, so classes can be
/// oversampled in parallel without changing the result.
pub fn smote_with_origins(
    table: &LabeledTable,
    target: usize,
    k: usize,
    seed: u64,
) -> Result<Smoted, BehaviorError> {
    if table.is_empty() {
        return Err(BehaviorError::EmptyTable);
    }
    if k == 0 || target == 0 {
        return Err(BehaviorError::InvalidConfig(
            "k and target must be positive".into(),
        ));
    }
    let counts = table.class_counts();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); counts.len()];
    for (i, &l) in table.labels.iter().enumerate() {
        members[l].push(i);
    }
    for (class, m) in members.iter().enumerate() {
        if !m.is_empty() && m.len() < target && m.len() < 2 {
            return Err(BehaviorError::ClassTooSmall {
                class,
                count: m.len(),
            });
        }
    }

    let classes: Vec<usize> = (0..members.len()).collect();
    let per_class: Vec<Vec<(usize, usize, f64)>> = par::map(&classes, |&class| {
        let m = &members[class];
        if m.is_empty() || m.len() >= target {
            return Vec::new();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(class as u64);
        let mut cache: Vec<Option<Vec<usize>>> = vec![None; m.len()];
        (0..target - m.len())
            .map(|_| {
                let i = rng.random_range(0..m.len());
                let nn = cache[i].get_or_insert_with(|| neighbors(table, m, i, k));
                let partner = nn[rng.random_range(0..nn.len())];
                (m[i], partner, rng.random::<f64>())
            })
            .collect()
    });

    let mut out = table.clone();
    let mut origins = Vec::new();
    for (class, samples) in per_class.into_iter().enumerate() {
        for (base, partner, u) in samples {
            let a = &table.rows[base];
            let b = &table.rows[partner];
            out.push(
                a.iter().zip(b).map(|(x, y)| x + u * (y - x)).collect(),
                class,
            );
            origins.push((base, partner));
        }
    }
    Ok(Smoted {
        table: out,
        original_len: table.len(),
        origins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[(f64, f64, usize)]) -> LabeledTable {
        let mut t = LabeledTable::new(vec!["a".into(), "b".into()]);
        for &(x, y, l) in rows {
            t.push(vec![x, y], l);
        }
        t
    }

    #[test]
    fn tops_up_to_target_and_keeps_originals() {
        let rows: Vec<(f64, f64, usize)> = (0..120)
            .map(|i| (i as f64, (i * 7 % 13) as f64, 0))
            .collect();
        let t = table(&rows);
        let s = smote(&t, 500, 5, 1).unwrap();
        assert_eq!(s.class_counts(), vec![500]);
        assert_eq!(&s.rows[..120], &t.rows[..]);
    }

    #[test]
    fn classes_at_target_are_unchanged() {
        let t = table(&[
            (0.0, 0.0, 0),
            (1.0, 1.0, 0),
            (2.0, 0.0, 1),
            (3.0, 1.0, 1),
            (4.0, 4.0, 1),
        ]);
        let s = smote(&t, 3, 5, 9).unwrap();
        assert_eq!(s.class_counts(), vec![3, 3]);
        assert_eq!(s.len(), 6);
    }

    #[test]
    fn two_points_give_points_on_their_segment() {
        let t = table(&[(1.0, 2.0, 0), (5.0, -6.0, 0)]);
        let s = smote(&t, 50, 1, 4).unwrap();
        for r in &s.rows[2..] {
            let u = (r[0] - 1.0) / 4.0;
            assert!((0.0..=1.0).contains(&u));
            assert!((r[1] - (2.0 - 8.0 * u)).abs() < 1e-9);
        }
    }

    #[test]
    fn singleton_class_cannot_be_oversampled() {
        let t = table(&[(0.0, 0.0, 0), (1.0, 1.0, 0), (2.0, 2.0, 1)]);
        assert!(matches!(
            smote(&t, 4, 5, 0),
            Err(BehaviorError::ClassTooSmall { class: 1, count: 1 })
        ));
    }

    #[test]
    fn nearest_neighbors_are_sorted_with_index_ties() {
        let t = table(&[(0.0, 0.0, 0), (1.0, 0.0, 0), (-1.0, 0.0, 0), (5.0, 0.0, 0)]);
        let m: Vec<usize> = (0..4).collect();
        assert_eq!(neighbors(&t, &m, 0, 2), vec![1, 2]);
        assert_eq!(neighbors(&t, &m, 3, 1), vec![1]);
    }
}
