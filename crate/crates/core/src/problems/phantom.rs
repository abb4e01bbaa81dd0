use crate::grid::ImageGrid;

// (intensity, semi-axis x, semi-axis y, center x, center y, rotation in degrees)
const ELLIPSES: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// Piecewise-constant head phantom (modified Shepp-Logan ellipses) with values in `[0, peak]`.
pub fn make_phantom(rows: usize, cols: usize, peak: f64) -> ImageGrid {
    assert!(peak > 0.0, "peak must be positive");
    let raw = ImageGrid::from_fn(rows, cols, |r, c| {
        let x = (2 * c + 1) as f64 / cols as f64 - 1.0;
        let y = 1.0 - (2 * r + 1) as f64 / rows as f64;
        let mut v = 0.0;
        for &(intensity, a, b, x0, y0, deg) in &ELLIPSES {
            let (s, co) = deg.to_radians().sin_cos();
            let dx = x - x0;
            let dy = y - y0;
            let u = dx * co + dy * s;
            let w = -dx * s + dy * co;
            if (u / a).powi(2) + (w / b).powi(2) <= 1.0 {
                v += intensity;
            }
        }
        v
    });
    let top = raw.max();
    if top <= 0.0 {
        return ImageGrid::zeros(rows, cols);
    }
    raw.map(|v| (v / top * peak).clamp(0.0, peak))
}

/// Affine map of `img` from `[min, max]` onto `[lo, hi]`.
pub fn rescale_to_range(img: &ImageGrid, lo: f64, hi: f64) -> ImageGrid {
    let (min, max) = (img.min(), img.max());
    if max <= min {
        return ImageGrid::filled(img.rows(), img.cols(), hi);
    }
    img.map(|v| lo + (v - min) / (max - min) * (hi - lo))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_and_range() {
        let p = make_phantom(64, 64, 878.0);
        assert_eq!(p.max(), 878.0);
        assert!(p.is_nonnegative());
        assert_eq!(p.min(), 0.0);
    }

    #[test]
    fn deterministic() {
        assert_eq!(make_phantom(32, 48, 5.0), make_phantom(32, 48, 5.0));
    }

    #[test]
    fn piecewise_constant() {
        let p = make_phantom(64, 64, 1.0);
        let mut levels: Vec<f64> = p.iter().map(|v| (v * 1e9).round() / 1e9).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        assert!(levels.len() <= 12, "{} levels", levels.len());
    }

    #[test]
    fn rescale_maps_extremes() {
        let p = rescale_to_range(&make_phantom(32, 32, 1.0), 1.0, 878.0);
        assert!((p.min() - 1.0).abs() < 1e-12);
        assert!((p.max() - 878.0).abs() < 1e-12);
    }
}
