//! Row-major raster grid plus the small image-processing kernel set the
//! analytic baseline needs.

/// Row-major 2D grid; `(x, y)` indexes column `x` of row `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Clone> Raster<T> {
    pub fn new(width: usize, height: usize, fill: T) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    pub fn map<U: Clone, F: Fn(&T) -> U>(&self, f: F) -> Raster<U> {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn in_bounds(&self, x: isize, y: isize) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable Gaussian blur with clamped borders.
pub fn gaussian_blur(src: &Raster<f64>, sigma: f64) -> Raster<f64> {
    if sigma <= 0.0 {
        return src.clone();
    }
    let k = gaussian_kernel(sigma);
    let radius = k.len() / 2;
    let mut tmp = Raster::new(src.width, src.height, 0.0);
    for y in 0..src.height {
        for x in 0..src.width {
            let mut acc = 0.0;
            for (i, w) in k.iter().enumerate() {
                let xi = (x as isize + i as isize - radius as isize)
                    .clamp(0, src.width as isize - 1) as usize;
                acc += w * src.get(xi, y);
            }
            tmp.set(x, y, acc);
        }
    }
    let mut out = Raster::new(src.width, src.height, 0.0);
    for y in 0..src.height {
        for x in 0..src.width {
            let mut acc = 0.0;
            for (i, w) in k.iter().enumerate() {
                let yi = (y as isize + i as isize - radius as isize)
                    .clamp(0, src.height as isize - 1) as usize;
                acc += w * tmp.get(x, yi);
            }
            out.set(x, y, acc);
        }
    }
    out
}

/// 3x3 Sobel gradients (gx, gy) with clamped borders.
pub fn sobel_gradients(src: &Raster<f64>) -> (Raster<f64>, Raster<f64>) {
    let mut gx = Raster::new(src.width, src.height, 0.0);
    let mut gy = Raster::new(src.width, src.height, 0.0);
    let at = |x: isize, y: isize| {
        let xi = x.clamp(0, src.width as isize - 1) as usize;
        let yi = y.clamp(0, src.height as isize - 1) as usize;
        *src.get(xi, yi)
    };
    for y in 0..src.height as isize {
        for x in 0..src.width as isize {
            let sx = -at(x - 1, y - 1) + at(x + 1, y - 1) - 2.0 * at(x - 1, y)
                + 2.0 * at(x + 1, y)
                - at(x - 1, y + 1)
                + at(x + 1, y + 1);
            let sy = -at(x - 1, y - 1) - 2.0 * at(x, y - 1) - at(x + 1, y - 1)
                + at(x - 1, y + 1)
                + 2.0 * at(x, y + 1)
                + at(x + 1, y + 1);
            gx.set(x as usize, y as usize, sx);
            gy.set(x as usize, y as usize, sy);
        }
    }
    (gx, gy)
}

/// 3x3 morphological opening (erosion then dilation) on a boolean mask.
pub fn morph_open(src: &Raster<bool>) -> Raster<bool> {
    let erode = |m: &Raster<bool>| {
        let mut out = Raster::new(m.width, m.height, false);
        for y in 0..m.height as isize {
            for x in 0..m.width as isize {
                let mut all = true;
                'win: for dy in -1..=1 {
                    for dx in -1..=1 {
                        if !m.in_bounds(x + dx, y + dy)
                            || !*m.get((x + dx) as usize, (y + dy) as usize)
                        {
                            all = false;
                            break 'win;
                        }
                    }
                }
                out.set(x as usize, y as usize, all);
            }
        }
        out
    };
    let dilate = |m: &Raster<bool>| {
        let mut out = Raster::new(m.width, m.height, false);
        for y in 0..m.height as isize {
            for x in 0..m.width as isize {
                let mut any = false;
                'win: for dy in -1..=1 {
                    for dx in -1..=1 {
                        if m.in_bounds(x + dx, y + dy)
                            && *m.get((x + dx) as usize, (y + dy) as usize)
                        {
                            any = true;
                            break 'win;
                        }
                    }
                }
                out.set(x as usize, y as usize, any);
            }
        }
        out
    };
    dilate(&erode(src))
}

/// 8-connected components of a boolean mask, as pixel lists.
pub fn connected_components(mask: &Raster<bool>) -> Vec<Vec<(usize, usize)>> {
    let mut seen = vec![false; mask.width * mask.height];
    let mut comps = Vec::new();
    for y0 in 0..mask.height {
        for x0 in 0..mask.width {
            let idx0 = y0 * mask.width + x0;
            if seen[idx0] || !*mask.get(x0, y0) {
                continue;
            }
            let mut comp = Vec::new();
            let mut stack = vec![(x0, y0)];
            seen[idx0] = true;
            while let Some((x, y)) = stack.pop() {
                comp.push((x, y));
                for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        let nx = x as isize + dx;
                        let ny = y as isize + dy;
                        if !mask.in_bounds(nx, ny) {
                            continue;
                        }
                        let (nx, ny) = (nx as usize, ny as usize);
                        let idx = ny * mask.width + nx;
                        if !seen[idx] && *mask.get(nx, ny) {
                            seen[idx] = true;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
            comps.push(comp);
        }
    }
    comps
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blur_preserves_mass_in_interior() {
        let mut r = Raster::new(33, 33, 0.0);
        r.set(16, 16, 1.0);
        let b = gaussian_blur(&r, 1.5);
        let sum: f64 = b.data.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(*b.get(16, 16) > *b.get(10, 16));
    }

    #[test]
    fn sobel_on_vertical_step() {
        let mut r = Raster::new(16, 16, 0.0);
        for y in 0..16 {
            for x in 8..16 {
                r.set(x, y, 1.0);
            }
        }
        let (gx, gy) = sobel_gradients(&r);
        assert!(gx.get(8, 8).abs() > 0.0);
        assert!(gy.get(8, 8).abs() < 1e-12);
    }

    #[test]
    fn morph_open_removes_specks() {
        let mut r = Raster::new(16, 16, false);
        r.set(3, 3, true); // isolated speck
        for x in 8..14 {
            for y in 8..14 {
                r.set(x, y, true);
            }
        }
        let o = morph_open(&r);
        assert!(!*o.get(3, 3));
        assert!(*o.get(10, 10));
    }

    #[test]
    fn components_counted() {
        let mut r = Raster::new(16, 16, false);
        r.set(1, 1, true);
        r.set(2, 2, true); // 8-connected with (1,1)
        r.set(10, 10, true);
        let comps = connected_components(&r);
        assert_eq!(comps.len(), 2);
    }
}
