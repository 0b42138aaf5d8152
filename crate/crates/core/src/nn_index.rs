//! Exact 2D nearest-neighbor queries over a uniform bucket grid.
//!
//! Cells have side `sqrt(bbox_area / n)`, at least `bbox_diagonal / (4 sqrt(n))`.
//! Queries expand square rings of cells around the query cell and stop once the ring boundary is farther
//! than the current k-th best distance, so results match brute force. Ties
//! are broken toward the lower point index.

use crate::error::{Error, Result};
use crate::geometry::{Point2, PointSet2};
use crate::real::{dist2_2d, Real};

/// A query hit: index into the indexed set and squared distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor<T> {
    pub index: usize,
    pub dist2: T,
}

impl<T: Real> Neighbor<T> {
    #[inline]
    fn precedes(&self, other: &Self) -> bool {
        self.dist2 < other.dist2 || (self.dist2 == other.dist2 && self.index < other.index)
    }
}

/// `floor(x)` saturated to +-1e15 (an `as` cast, avoiding a libm call).
#[inline]
fn floor_cell<T: Real>(x: T) -> isize {
    let x = x.as_f64().clamp(-1e15, 1e15);
    let t = x as i64;
    (if (t as f64) > x { t - 1 } else { t }) as isize
}

#[derive(Clone, Debug)]
pub struct Index2<T> {
    len: usize,
    origin: Point2<T>,
    cell: T,
    inv_cell: T,
    nx: usize,
    ny: usize,
    /// `cell_start[c]..cell_start[c + 1]` indexes `sorted_*` for cell `c`.
    cell_start: Vec<u32>,
    sorted_index: Vec<u32>,
    sorted_points: Vec<Point2<T>>,
    /// Chebyshev distance (in cells) from each cell to the nearest nonempty cell.
    empty_rings: Vec<u32>,
}

impl<T: Real> Index2<T> {
    pub fn build(set: &PointSet2<T>) -> Result<Self> {
        Self::from_points(set.points())
    }

    pub fn from_points(pts: &[Point2<T>]) -> Result<Self> {
        let n = pts.len();
        if n == 0 {
            return Err(Error::EmptySet);
        }
        let mut lo = pts[0];
        let mut hi = pts[0];
        for p in pts {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let ext = [hi[0] - lo[0], hi[1] - lo[1]];
        // about one point per cell by area; the diagonal floor bounds the cell
        // count when the bounding box collapses to a sliver
        let nf = T::from_usize_lossy(n);
        let diag = (ext[0] * ext[0] + ext[1] * ext[1]).sqrt();
        let mut cell = (ext[0] * ext[1] / nf).sqrt().max(diag / nf.sqrt() / T::lit(4.0));
        if !(cell > T::zero() && cell.is_finite()) {
            cell = T::one();
        }
        let cells_along = |e: T| -> usize {
            let c = (e / cell).ceil().to_usize().unwrap_or(1);
            c.clamp(1, n + 1)
        };
        let nx = cells_along(ext[0]);
        let ny = cells_along(ext[1]);
        let mut index = Self {
            len: n,
            origin: lo,
            cell,
            inv_cell: T::one() / cell,
            nx,
            ny,
            cell_start: vec![0; nx * ny + 1],
            sorted_index: vec![0; n],
            sorted_points: vec![[T::zero(); 2]; n],
            empty_rings: Vec::new(),
        };
        let cell_ids: Vec<usize> = pts.iter().map(|p| index.cell_of(p)).collect();
        for &c in &cell_ids {
            index.cell_start[c + 1] += 1;
        }
        for c in 0..nx * ny {
            index.cell_start[c + 1] += index.cell_start[c];
        }
        let mut fill = index.cell_start.clone();
        for (i, &c) in cell_ids.iter().enumerate() {
            let slot = fill[c] as usize;
            fill[c] += 1;
            index.sorted_index[slot] = i as u32;
            index.sorted_points[slot] = pts[i];
        }
        index.empty_rings = index.chessboard_transform();
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    /// Two-pass 8-neighbor distance transform; exact for the chessboard metric.
    fn chessboard_transform(&self) -> Vec<u32> {
        let (nx, ny) = (self.nx, self.ny);
        let far = u32::MAX / 2;
        let mut d: Vec<u32> = (0..nx * ny)
            .map(|c| if self.cell_start[c] < self.cell_start[c + 1] { 0 } else { far })
            .collect();
        for row in 0..ny {
            for col in 0..nx {
                let mut v = d[row * nx + col];
                if col > 0 {
                    v = v.min(d[row * nx + col - 1] + 1);
                }
                if row > 0 {
                    let up = (row - 1) * nx;
                    v = v.min(d[up + col] + 1);
                    if col > 0 {
                        v = v.min(d[up + col - 1] + 1);
                    }
                    if col + 1 < nx {
                        v = v.min(d[up + col + 1] + 1);
                    }
                }
                d[row * nx + col] = v;
            }
        }
        for row in (0..ny).rev() {
            for col in (0..nx).rev() {
                let mut v = d[row * nx + col];
                if col + 1 < nx {
                    v = v.min(d[row * nx + col + 1] + 1);
                }
                if row + 1 < ny {
                    let down = (row + 1) * nx;
                    v = v.min(d[down + col] + 1);
                    if col > 0 {
                        v = v.min(d[down + col - 1] + 1);
                    }
                    if col + 1 < nx {
                        v = v.min(d[down + col + 1] + 1);
                    }
                }
                d[row * nx + col] = v;
            }
        }
        d
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    fn axis_cell(&self, v: T, origin: T, count: usize) -> usize {
        floor_cell((v - origin) * self.inv_cell).clamp(0, count as isize - 1) as usize
    }

    #[inline]
    fn cell_coords(&self, p: &Point2<T>) -> (usize, usize) {
        (
            self.axis_cell(p[0], self.origin[0], self.nx),
            self.axis_cell(p[1], self.origin[1], self.ny),
        )
    }

    #[inline]
    fn cell_of(&self, p: &Point2<T>) -> usize {
        let (cx, cy) = self.cell_coords(p);
        cy * self.nx + cx
    }

    /// The `k` nearest indexed points, ascending by `(dist2, index)`.
    pub fn knn(&self, q: &Point2<T>, k: usize) -> Result<Vec<Neighbor<T>>> {
        let mut out = Vec::with_capacity(k);
        self.knn_into(q, k, &mut out)?;
        Ok(out)
    }

    /// Non-allocating form of [`Index2::knn`]; `out` is overwritten.
    pub fn knn_into(&self, q: &Point2<T>, k: usize, out: &mut Vec<Neighbor<T>>) -> Result<()> {
        if k > self.len {
            return Err(Error::KTooLarge { k, available: self.len });
        }
        out.clear();
        if k == 0 {
            return Ok(());
        }
        self.search(q, k, out);
        Ok(())
    }

    /// Single nearest neighbor.
    #[inline]
    pub fn nearest(&self, q: &Point2<T>) -> Neighbor<T> {
        let mut out = Vec::with_capacity(1);
        self.search(q, 1, &mut out);
        out[0]
    }

    /// Unclamped cell coordinates of `p` (may lie outside the grid).
    #[inline]
    fn virtual_cell(&self, p: &Point2<T>) -> [isize; 2] {
        [
            floor_cell((p[0] - self.origin[0]) * self.inv_cell),
            floor_cell((p[1] - self.origin[1]) * self.inv_cell),
        ]
    }

    /// Squared distance from `q` to the cell rectangle `cols x rows` (inclusive).
    #[inline]
    fn rect_dist2(&self, q: &Point2<T>, cols: (isize, isize), rows: (isize, isize)) -> T {
        let axis = |v: T, o: T, lo: isize, hi: isize| {
            let a = o + T::from_isize(lo).unwrap() * self.cell;
            let b = o + T::from_isize(hi + 1).unwrap() * self.cell;
            (a - v).max(v - b).max(T::zero())
        };
        let dx = axis(q[0], self.origin[0], cols.0, cols.1);
        let dy = axis(q[1], self.origin[1], rows.0, rows.1);
        dx * dx + dy * dy
    }

    /// Lower bound on the squared distance from `q` to any grid cell more
    /// than `r` rings from the query cell, or `None` if no such cell exists.
    fn beyond_ring(&self, q: &Point2<T>, v: [isize; 2], r: isize) -> Option<T> {
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        let mut bound: Option<T> = None;
        let mut take = |d: T| bound = Some(bound.map_or(d, |b: T| b.min(d)));
        if v[0] - r > 0 {
            take(self.rect_dist2(q, (0, (v[0] - r - 1).min(nx - 1)), (0, ny - 1)));
        }
        if v[0] + r < nx - 1 {
            take(self.rect_dist2(q, ((v[0] + r + 1).max(0), nx - 1), (0, ny - 1)));
        }
        if v[1] - r > 0 {
            take(self.rect_dist2(q, (0, nx - 1), (0, (v[1] - r - 1).min(ny - 1))));
        }
        if v[1] + r < ny - 1 {
            take(self.rect_dist2(q, (0, nx - 1), ((v[1] + r + 1).max(0), ny - 1)));
        }
        bound
    }

    /// Single-neighbor search for queries inside the grid; `None` sends the
    /// query to the general search. Distances are compared in cell units.
    fn search_one(&self, q: &Point2<T>) -> Option<(Neighbor<T>, usize)> {
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        let gx = (q[0] - self.origin[0]) * self.inv_cell;
        let gy = (q[1] - self.origin[1]) * self.inv_cell;
        let (vx, vy) = (floor_cell(gx), floor_cell(gy));
        if !((0..nx).contains(&vx) && (0..ny).contains(&vy)) {
            return None;
        }
        // offset of q inside its cell, in [0, 1)
        let fx = gx - T::from_isize(vx).unwrap();
        let fy = gy - T::from_isize(vy).unwrap();
        let inset = fx.min(T::one() - fx).min(fy).min(T::one() - fy).max(T::zero());
        let gap = |c: isize, v: isize, f: T| -> T {
            if c < v {
                T::from_isize(v - c - 1).unwrap() + f
            } else if c > v {
                T::from_isize(c - v).unwrap() - f
            } else {
                T::zero()
            }
        };
        let to_cells = self.inv_cell * self.inv_cell;
        let slack = T::one() - T::lit(1e-9);
        let reach = vx.max(nx - 1 - vx).max(vy).max(ny - 1 - vy);
        let mut best: Option<Neighbor<T>> = None;
        let mut scanned = 0;
        let visit = |col: isize, row: isize, best: &mut Option<Neighbor<T>>| -> usize {
            let c = row as usize * self.nx + col as usize;
            let (start, end) = (self.cell_start[c] as usize, self.cell_start[c + 1] as usize);
            if start == end {
                return 0;
            }
            if let Some(b) = best {
                let dx = gap(col, vx, fx);
                let dy = gap(row, vy, fy);
                if (dx * dx + dy * dy) * slack > b.dist2 * to_cells {
                    return 0;
                }
            }
            for slot in start..end {
                let cand = Neighbor {
                    index: self.sorted_index[slot] as usize,
                    dist2: dist2_2d(q, &self.sorted_points[slot]),
                };
                if best.map_or(true, |b| cand.precedes(&b)) {
                    *best = Some(cand);
                }
            }
            1
        };
        let mut r = self.empty_rings[vy as usize * self.nx + vx as usize] as isize;
        let block = r <= 1;
        if block {
            // the 3x3 block around the query cell as three contiguous runs
            let (mut best_d, mut best_i) = (T::infinity(), u32::MAX);
            let (col_lo, col_hi) = ((vx - 1).max(0) as usize, (vx + 1).min(nx - 1) as usize);
            for row in (vy - 1).max(0) as usize..=(vy + 1).min(ny - 1) as usize {
                let start = self.cell_start[row * self.nx + col_lo] as usize;
                let end = self.cell_start[row * self.nx + col_hi + 1] as usize;
                for (p, &i) in self.sorted_points[start..end].iter().zip(&self.sorted_index[start..end]) {
                    let d = dist2_2d(q, p);
                    if d < best_d || (d == best_d && i < best_i) {
                        best_d = d;
                        best_i = i;
                    }
                }
                scanned += (start < end) as usize;
            }
            best = Some(Neighbor { index: best_i as usize, dist2: best_d });
            r = 1;
        }
        loop {
            if !(r == 1 && block) {
                let (col_lo, col_hi) = ((vx - r).max(0), (vx + r).min(nx - 1));
                for row in [vy - r, vy + r] {
                    if (0..ny).contains(&row) {
                        for col in col_lo..=col_hi {
                            scanned += visit(col, row, &mut best);
                        }
                    }
                }
                let (row_lo, row_hi) = ((vy - r + 1).max(0), (vy + r - 1).min(ny - 1));
                for col in [vx - r, vx + r] {
                    if (0..nx).contains(&col) {
                        for row in row_lo..=row_hi {
                            scanned += visit(col, row, &mut best);
                        }
                    }
                }
            }
            if r >= reach {
                break;
            }
            // every cell of ring r + 1 or beyond is at least this far (cells)
            let bound = inset + T::from_isize(r).unwrap();
            if let Some(b) = best {
                if b.dist2 * to_cells < bound * bound * slack {
                    break;
                }
            }
            r += 1;
        }
        best.map(|b| (b, scanned))
    }

    /// Ring search around the query's (possibly out-of-grid) cell; returns
    /// the number of nonempty cells scanned.
    fn search(&self, q: &Point2<T>, k: usize, best: &mut Vec<Neighbor<T>>) -> usize {
        if k == 1 {
            if let Some((hit, scanned)) = self.search_one(q) {
                best.clear();
                best.push(hit);
                return scanned;
            }
        }
        let [vx, vy] = self.virtual_cell(q);
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        // Chebyshev distance from the query cell to the nearest grid cell
        let gap = |v: isize, n: isize| if v < 0 { -v } else if v >= n { v - n + 1 } else { 0 };
        // clamping onto the grid never increases the Chebyshev distance to a
        // grid cell, so the clamped cell's empty radius is a valid start
        let clamped = vy.clamp(0, ny - 1) as usize * self.nx + vx.clamp(0, nx - 1) as usize;
        let mut r = gap(vx, nx).max(gap(vy, ny)).max(self.empty_rings[clamped] as isize);
        let margin = T::one() - T::lit(1e-9);
        let mut scanned = 0;
        loop {
            let col_lo = (vx - r).max(0);
            let col_hi = (vx + r).min(nx - 1);
            if col_lo <= col_hi {
                for row in [vy - r, vy + r] {
                    if (0..ny).contains(&row) {
                        scanned += self.scan_run(q, k, (col_lo, col_hi), row, best);
                    }
                    if r == 0 {
                        break;
                    }
                }
            }
            let row_lo = (vy - r + 1).max(0);
            let row_hi = (vy + r - 1).min(ny - 1);
            for col in [vx - r, vx + r] {
                if r > 0 && (0..nx).contains(&col) {
                    for row in row_lo..=row_hi {
                        scanned += self.scan_run(q, k, (col, col), row, best);
                    }
                }
            }
            match self.beyond_ring(q, [vx, vy], r) {
                None => break,
                Some(bound) if best.len() == k && best[k - 1].dist2 < bound * margin => break,
                Some(_) => r += 1,
            }
        }
        scanned
    }

    /// Scans the contiguous cells `cols.0..=cols.1` of one row.
    #[inline(always)]
    fn scan_run(&self, q: &Point2<T>, k: usize, cols: (isize, isize), row: isize, best: &mut Vec<Neighbor<T>>) -> usize {
        let base = row as usize * self.nx;
        let start = self.cell_start[base + cols.0 as usize] as usize;
        let end = self.cell_start[base + cols.1 as usize + 1] as usize;
        if start == end {
            return 0;
        }
        if best.len() == k && self.rect_dist2(q, cols, (row, row)) * (T::one() - T::lit(1e-9)) > best[k - 1].dist2 {
            return 0;
        }
        self.scan_slots(q, k, start, end, best);
        1
    }

    #[inline]
    fn scan_slots(&self, q: &Point2<T>, k: usize, start: usize, end: usize, best: &mut Vec<Neighbor<T>>) {
        let pts = &self.sorted_points[start..end];
        let ids = &self.sorted_index[start..end];
        if k == 1 {
            let mut top = best.first().copied();
            for (p, &i) in pts.iter().zip(ids) {
                let cand = Neighbor { index: i as usize, dist2: dist2_2d(q, p) };
                if top.map_or(true, |t| cand.precedes(&t)) {
                    top = Some(cand);
                }
            }
            if let Some(t) = top {
                best.clear();
                best.push(t);
            }
            return;
        }
        for (p, &i) in pts.iter().zip(ids) {
            let cand = Neighbor { index: i as usize, dist2: dist2_2d(q, p) };
            if best.len() < k {
                let pos = best.iter().position(|b| cand.precedes(b)).unwrap_or(best.len());
                best.insert(pos, cand);
            } else if cand.precedes(&best[k - 1]) {
                let pos = best.iter().position(|b| cand.precedes(b)).unwrap();
                best.pop();
                best.insert(pos, cand);
            }
        }
    }
}
