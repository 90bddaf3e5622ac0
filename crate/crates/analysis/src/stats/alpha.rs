use super::var;
use crate::error::{Error, Result};

/// Cronbach's α over an items × observations matrix.
pub fn cronbach_alpha(items: &[Vec<f64>]) -> Result<f64> {
    let k = items.len();
    if k < 2 {
        return Err(Error::InsufficientData(format!("alpha needs 2 items, got {k}")));
    }
    let n = items[0].len();
    if n < 2 || items.iter().any(|i| i.len() != n) {
        return Err(Error::InvalidInput("items need equal lengths of at least 2".into()));
    }
    let totals: Vec<f64> = (0..n).map(|j| items.iter().map(|i| i[j]).sum()).collect();
    let total_var = var(&totals);
    if total_var == 0.0 {
        return Err(Error::ZeroVariance("total scores are constant".into()));
    }
    let item_var: f64 = items.iter().map(|i| var(i)).sum();
    let k = k as f64;
    Ok(k / (k - 1.0) * (1.0 - item_var / total_var))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicated_items() {
        let a = vec![1.0, 3.0, 2.0, 5.0, 4.0];
        assert!((cronbach_alpha(&[a.clone(), a.clone(), a]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_matrix() {
        // items: [1,2,3,4], [2,2,3,5], [1,3,3,4]
        // item variances 5/3, 2, 19/12 sum to 21/4; totals [4,7,9,13] have
        // variance 57/4, so alpha = 1.5 (1 - 21/57) = 18/19
        let m = vec![vec![1.0, 2.0, 3.0, 4.0], vec![2.0, 2.0, 3.0, 5.0], vec![1.0, 3.0, 3.0, 4.0]];
        assert!((cronbach_alpha(&m).unwrap() - 18.0 / 19.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate() {
        assert!(cronbach_alpha(&[vec![1.0, 2.0]]).is_err());
        assert!(cronbach_alpha(&[vec![1.0, 1.0], vec![2.0, 2.0]]).is_err());
    }
}
