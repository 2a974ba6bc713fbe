use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Cosine,
    #[default]
    Euclidean,
}

impl Metric {
    pub fn distance(self, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
        match self {
            Metric::Euclidean => euclidean(a, b),
            Metric::Cosine => 1.0 - cosine_similarity(a, b),
        }
    }
}

pub fn euclidean(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine_similarity(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        a.dot(&b) / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr1;

    #[test]
    fn distances() {
        let a = arr1(&[3.0, 0.0]);
        let b = arr1(&[0.0, 4.0]);
        assert_eq!(euclidean(a.view(), b.view()), 5.0);
        assert_eq!(Metric::Cosine.distance(a.view(), b.view()), 1.0);
        assert_eq!(Metric::Cosine.distance(a.view(), a.view()), 0.0);
        let z = arr1(&[0.0, 0.0]);
        assert_eq!(cosine_similarity(a.view(), z.view()), 0.0);
    }
}
