use super::Partition;
use crate::error::{NspError, Result};

/// Largest point count accepted by the enumeration oracles (Bell(10) = 115975).
pub const MAX_ENUMERATE: usize = 10;

pub fn bell_number(n: usize) -> u64 {
    // Bell triangle.
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = vec![*row.last().unwrap()];
        for &v in &row {
            next.push(next.last().unwrap() + v);
        }
        row = next;
    }
    row[0]
}

/// Every set partition of `0..n`, each exactly once, without background.
pub fn enumerate_partitions(n: usize) -> Result<Vec<Partition>> {
    if n > MAX_ENUMERATE {
        return Err(NspError::TooLarge {
            what: "partition enumeration",
            n,
            max: MAX_ENUMERATE,
        });
    }
    let mut out = Vec::with_capacity(bell_number(n) as usize);
    let mut rgs = vec![0usize; n];
    fill(&mut rgs, 0, 0, &mut |z| {
        out.push(Partition::from_labels(&z.iter().map(|l| l + 1).collect::<Vec<_>>()))
    });
    Ok(out)
}

/// Every (background, partition) pair over `0..n`: each point is either
/// background or in a cluster. There are Bell(n+1) of them.
pub fn enumerate_partitions_with_background(n: usize) -> Result<Vec<Partition>> {
    if n >= MAX_ENUMERATE {
        return Err(NspError::TooLarge {
            what: "partition enumeration with background",
            n,
            max: MAX_ENUMERATE - 1,
        });
    }
    // Partitions of n+1 points where the block holding the extra point is
    // the background.
    let mut out = Vec::with_capacity(bell_number(n + 1) as usize);
    let mut rgs = vec![0usize; n + 1];
    fill(&mut rgs, 0, 0, &mut |z| {
        let anchor = z[n];
        let labels: Vec<usize> = z[..n].iter().map(|&l| if l == anchor { 0 } else { l + 1 }).collect();
        out.push(Partition::from_labels(&labels));
    });
    Ok(out)
}

// Restricted growth strings: z[0] = 0, z[i] <= 1 + max(z[..i]).
fn fill(z: &mut [usize], i: usize, max_plus_one: usize, emit: &mut dyn FnMut(&[usize])) {
    if i == z.len() {
        emit(z);
        return;
    }
    for l in 0..=max_plus_one {
        z[i] = l;
        fill(z, i + 1, max_plus_one.max(l + 1), emit);
    }
}
