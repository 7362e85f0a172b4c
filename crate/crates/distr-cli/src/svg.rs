//! Minimal SVG scatter export for 2-D embeddings.

use ndarray::{Array1, Array2};

const PALETTE: [&str; 12] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac", "#1f77b4", "#d62728",
];

/// Render prototypes as circles with area proportional to their mass,
/// colored by label when labels are present.
pub fn scatter(z: &Array2<f64>, masses: &Array1<f64>, labels: Option<&[i64]>) -> String {
    let width = 640.0;
    let height = 640.0;
    let margin = 40.0;
    let n = z.nrows();

    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        xmin = xmin.min(z[[i, 0]]);
        xmax = xmax.max(z[[i, 0]]);
        ymin = ymin.min(z[[i, 1]]);
        ymax = ymax.max(z[[i, 1]]);
    }
    let xspan = (xmax - xmin).max(1e-9);
    let yspan = (ymax - ymin).max(1e-9);
    let sx = (width - 2.0 * margin) / xspan;
    let sy = (height - 2.0 * margin) / yspan;

    let max_mass = masses.iter().cloned().fold(0.0f64, f64::max).max(1e-12);
    let max_radius = 24.0;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for i in 0..n {
        let cx = margin + (z[[i, 0]] - xmin) * sx;
        // SVG y grows downward.
        let cy = height - margin - (z[[i, 1]] - ymin) * sy;
        // Area ∝ mass.
        let r = max_radius * (masses[i] / max_mass).max(0.0).sqrt();
        if r <= 0.0 {
            continue;
        }
        let color = match labels {
            Some(ls) if ls[i] >= 0 => PALETTE[(ls[i] as usize) % PALETTE.len()],
            _ => "#4e79a7",
        };
        svg.push_str(&format!(
            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{r:.2}\" fill=\"{color}\" \
             fill-opacity=\"0.8\" stroke=\"#333\" stroke-width=\"0.5\"/>\n"
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn scatter_emits_circles_scaled_by_mass() {
        let z = array![[0.0, 0.0], [1.0, 1.0], [2.0, 0.5]];
        let masses = array![0.5, 0.25, 0.0];
        let svg = scatter(&z, &masses, Some(&[0, 1, 0]));
        // Zero-mass prototype is skipped.
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains("svg"));
    }
}
