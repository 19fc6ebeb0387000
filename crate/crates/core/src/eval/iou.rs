use crate::geometry::{BinaryMask, GeometryError};

/// Intersection over union; 1.0 when both masks are empty.
pub fn compute_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64, GeometryError> {
    let inter = a.intersection_count(b)?;
    let union = a.union_count(b)?;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifted_block() {
        let a = BinaryMask::from_fn(4, 4, |u, v| (1..3).contains(&u) && (1..3).contains(&v));
        let b = a.shifted(1, 0);
        assert!((compute_iou(&a, &b).unwrap() - 2.0 / 6.0).abs() < 1e-15);
        assert_eq!(compute_iou(&a, &a).unwrap(), 1.0);
        assert_eq!(compute_iou(&a, &a.shifted(2, 0)).unwrap(), 0.0);
        assert_eq!(compute_iou(&BinaryMask::new(3, 3), &BinaryMask::new(3, 3)).unwrap(), 1.0);
        assert!(compute_iou(&a, &BinaryMask::new(3, 4)).is_err());
    }
}
