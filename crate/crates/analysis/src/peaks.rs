//! Local-maximum detection by topographic prominence.

/// Indices of strict local maxima. A flat top counts once, at its middle.
pub fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = x.len();
    let mut i = 1;
    while i + 1 < n {
        if x[i - 1] < x[i] {
            let mut j = i + 1;
            while j + 1 < n && x[j] == x[i] {
                j += 1;
            }
            if x[j] < x[i] {
                out.push((i + j - 1) / 2);
                i = j;
                continue;
            }
        }
        i += 1;
    }
    out
}

/// Height of each peak above the higher of the two lowest points reached
/// before climbing past it on either side.
pub fn prominences(x: &[f64], peaks: &[usize]) -> Vec<f64> {
    peaks
        .iter()
        .map(|&p| {
            let h = x[p];
            let mut left_min = h;
            for &v in x[..p].iter().rev() {
                if v > h {
                    break;
                }
                left_min = left_min.min(v);
            }
            let mut right_min = h;
            for &v in &x[p + 1..] {
                if v > h {
                    break;
                }
                right_min = right_min.min(v);
            }
            h - left_min.max(right_min)
        })
        .collect()
}

/// Maxima with prominence at least `min_prominence`, thinned so that no two
/// survivors are closer than `min_distance` samples (taller peaks win).
pub fn find_peaks(x: &[f64], min_prominence: f64, min_distance: usize) -> Vec<usize> {
    let cand = local_maxima(x);
    let prom = prominences(x, &cand);
    let cand: Vec<usize> = cand.into_iter().zip(prom).filter(|&(_, p)| p >= min_prominence).map(|(i, _)| i).collect();
    if min_distance <= 1 {
        return cand;
    }
    let mut order: Vec<usize> = (0..cand.len()).collect();
    order.sort_by(|&a, &b| x[cand[b]].total_cmp(&x[cand[a]]).then(a.cmp(&b)));
    let mut keep = vec![true; cand.len()];
    for &k in &order {
        if !keep[k] {
            continue;
        }
        let c = cand[k];
        let mut j = k;
        while j > 0 && c - cand[j - 1] < min_distance {
            j -= 1;
            keep[j] = false;
        }
        let mut j = k + 1;
        while j < cand.len() && cand[j] - c < min_distance {
            keep[j] = false;
            j += 1;
        }
    }
    cand.into_iter().zip(keep).filter(|&(_, k)| k).map(|(i, _)| i).collect()
}
