//! 2-D binary occupancy grids: loading, cell queries, and conservative
//! segment-vs-grid tests.
//!
//! The grid is the single source of collision truth. Cells are squares of
//! side `resolution`; cell `(0, 0)` has its lower-left corner at `origin`.
//! Everything outside the stored extent counts as occupied, so a planner
//! can never wander off the known map. Occupancy is binary and never
//! inflated: whole-body checks are done against the raw cells.

use std::fmt;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("map parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("failed to read map: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to decode bitmap: {0}")]
    Bitmap(String),
}

/// Binary occupancy grid over a rectangular world region.
#[derive(Clone)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: [f64; 2],
    cells: Vec<bool>,
    // Inclusive prefix sums of occupied counts, (width+1) x (height+1),
    // for O(1) "any occupied cell in this rectangle" queries.
    prefix: Vec<u32>,
}

impl fmt::Debug for OccupancyGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OccupancyGrid")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("resolution", &self.resolution)
            .field("origin", &self.origin)
            .finish()
    }
}

impl OccupancyGrid {
    /// All-free grid. `origin` is the world position of cell (0,0)'s
    /// lower-left corner.
    pub fn new_free(
        width: usize,
        height: usize,
        resolution: f64,
        origin: [f64; 2],
    ) -> Result<Self, MapError> {
        if width == 0 || height == 0 {
            return Err(MapError::InvalidMap(format!(
                "zero dimension: {width} x {height}"
            )));
        }
        if !(resolution > 0.0) {
            return Err(MapError::InvalidMap(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        let mut grid = Self {
            width,
            height,
            resolution,
            origin,
            cells: vec![false; width * height],
            prefix: Vec::new(),
        };
        grid.rebuild_prefix();
        Ok(grid)
    }

    /// Parse the ASCII map format:
    ///
    /// ```text
    /// res 0.1 origin 0 0
    /// ..#..
    /// ..#..
    /// .....
    /// ```
    ///
    /// `#` is occupied, `.` free. The first data line is the top row of the
    /// map (largest y), matching how the text reads.
    pub fn parse_ascii(doc: &str) -> Result<Self, MapError> {
        let mut lines = doc.lines().enumerate();
        let (_, header) = lines.next().ok_or(MapError::Parse {
            line: 1,
            msg: "empty document".into(),
        })?;
        let (resolution, origin) = parse_header(header)?;

        let mut rows: Vec<Vec<bool>> = Vec::new();
        let mut width = None;
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut row = Vec::with_capacity(line.len());
            for (col, ch) in line.chars().enumerate() {
                match ch {
                    '#' => row.push(true),
                    '.' => row.push(false),
                    other => {
                        return Err(MapError::Parse {
                            line: line_no,
                            msg: format!("unexpected character {other:?} at column {col}"),
                        })
                    }
                }
            }
            match width {
                None => width = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(MapError::Parse {
                        line: line_no,
                        msg: format!("row width {} differs from first row {}", row.len(), w),
                    })
                }
                _ => {}
            }
            rows.push(row);
        }
        let width = width.ok_or(MapError::InvalidMap("no grid rows".into()))?;
        if width == 0 {
            return Err(MapError::InvalidMap("zero-width rows".into()));
        }

        let height = rows.len();
        let mut grid = Self::new_free(width, height, resolution, origin)?;
        // First text row is the top of the map.
        for (k, row) in rows.iter().enumerate() {
            let j = height - 1 - k;
            for (i, &occ) in row.iter().enumerate() {
                grid.cells[j * width + i] = occ;
            }
        }
        grid.rebuild_prefix();
        Ok(grid)
    }

    /// Load a map document. `.png`/`.pgm`/`.bmp` paths decode as grayscale
    /// bitmaps thresholded at mid-gray (dark = occupied) with the supplied
    /// resolution and origin; anything else parses as the ASCII format.
    pub fn load(path: &Path, bitmap_geometry: Option<(f64, [f64; 2])>) -> Result<Self, MapError> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        if matches!(ext.as_str(), "png" | "pgm" | "bmp") {
            let (resolution, origin) = bitmap_geometry.unwrap_or((0.1, [0.0, 0.0]));
            Self::from_bitmap(path, resolution, origin)
        } else {
            let doc = std::fs::read_to_string(path)?;
            Self::parse_ascii(&doc)
        }
    }

    /// Decode a grayscale bitmap; pixels darker than mid-gray become
    /// occupied. Pixel row 0 is the top of the map.
    pub fn from_bitmap(
        path: &Path,
        resolution: f64,
        origin: [f64; 2],
    ) -> Result<Self, MapError> {
        let img = image::open(path)
            .map_err(|e| MapError::Bitmap(e.to_string()))?
            .into_luma8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut grid = Self::new_free(w, h, resolution, origin)?;
        for (x, y, pixel) in img.enumerate_pixels() {
            let j = h - 1 - y as usize;
            grid.cells[j * w + x as usize] = pixel.0[0] < 128;
        }
        grid.rebuild_prefix();
        Ok(grid)
    }

    pub fn width_cells(&self) -> usize {
        self.width
    }

    pub fn height_cells(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    /// World extent as `[xmin, ymin, xmax, ymax]`.
    pub fn world_bounds(&self) -> [f64; 4] {
        [
            self.origin[0],
            self.origin[1],
            self.origin[0] + self.width as f64 * self.resolution,
            self.origin[1] + self.height as f64 * self.resolution,
        ]
    }

    /// Mark one cell; out-of-bounds indices are ignored.
    pub fn set_occupied(&mut self, i: i64, j: i64, occupied: bool) {
        if i >= 0 && j >= 0 && (i as usize) < self.width && (j as usize) < self.height {
            self.cells[j as usize * self.width + i as usize] = occupied;
            self.rebuild_prefix();
        }
    }

    /// Fill every cell intersecting the closed world rectangle.
    pub fn fill_rect_world(&mut self, x0: f64, y0: f64, x1: f64, y1: f64) {
        let (xa, xb) = (x0.min(x1), x0.max(x1));
        let (ya, yb) = (y0.min(y1), y0.max(y1));
        let i0 = ((xa - self.origin[0]) / self.resolution).floor().max(0.0) as usize;
        let j0 = ((ya - self.origin[1]) / self.resolution).floor().max(0.0) as usize;
        let i1 = (((xb - self.origin[0]) / self.resolution).ceil() as i64 - 1)
            .clamp(0, self.width as i64 - 1) as usize;
        let j1 = (((yb - self.origin[1]) / self.resolution).ceil() as i64 - 1)
            .clamp(0, self.height as i64 - 1) as usize;
        for j in j0..=j1 {
            for i in i0..=i1 {
                self.cells[j * self.width + i] = true;
            }
        }
        self.rebuild_prefix();
    }

    fn rebuild_prefix(&mut self) {
        let (w, h) = (self.width, self.height);
        let mut prefix = vec![0u32; (w + 1) * (h + 1)];
        for j in 0..h {
            let mut row_sum = 0u32;
            for i in 0..w {
                row_sum += self.cells[j * w + i] as u32;
                prefix[(j + 1) * (w + 1) + i + 1] = prefix[j * (w + 1) + i + 1] + row_sum;
            }
        }
        self.prefix = prefix;
    }

    /// Cell index containing a world point (unclamped; may be out of range).
    pub fn world_to_cell(&self, p: [f64; 2]) -> (i64, i64) {
        (
            ((p[0] - self.origin[0]) / self.resolution).floor() as i64,
            ((p[1] - self.origin[1]) / self.resolution).floor() as i64,
        )
    }

    /// World coordinates of a cell center.
    pub fn cell_to_world_center(&self, i: i64, j: i64) -> [f64; 2] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.resolution,
            self.origin[1] + (j as f64 + 0.5) * self.resolution,
        ]
    }

    /// Occupancy of a cell; anything outside the map reports occupied.
    pub fn is_cell_occupied(&self, i: i64, j: i64) -> bool {
        if i < 0 || j < 0 || i as usize >= self.width || j as usize >= self.height {
            return true;
        }
        self.cells[j as usize * self.width + i as usize]
    }

    /// Occupancy of the cell containing a world point.
    pub fn is_point_occupied(&self, p: [f64; 2]) -> bool {
        let (i, j) = self.world_to_cell(p);
        self.is_cell_occupied(i, j)
    }

    /// True if any cell in the inclusive index rectangle is occupied or the
    /// rectangle leaves the map.
    pub fn region_has_occupied(&self, i0: i64, j0: i64, i1: i64, j1: i64) -> bool {
        if i0 < 0 || j0 < 0 || i1 >= self.width as i64 || j1 >= self.height as i64 {
            return true;
        }
        if i1 < i0 || j1 < j0 {
            return false;
        }
        let (i0, j0, i1, j1) = (i0 as usize, j0 as usize, i1 as usize, j1 as usize);
        let w1 = self.width + 1;
        let sum = self.prefix[(j1 + 1) * w1 + i1 + 1] + self.prefix[j0 * w1 + i0]
            - self.prefix[j0 * w1 + i1 + 1]
            - self.prefix[(j1 + 1) * w1 + i0];
        sum > 0
    }

    /// True iff the segment from `p0` to `p1` touches any occupied cell.
    ///
    /// Supercover traversal: every cell whose closed square the segment
    /// geometrically intersects is tested, so thin diagonal features are
    /// never skipped. Out-of-map travel counts as occupied.
    pub fn segment_hits_obstacle(&self, p0: [f64; 2], p1: [f64; 2]) -> bool {
        let mut hit = false;
        self.traverse_segment(p0, p1, |i, j| {
            if self.is_cell_occupied(i, j) {
                hit = true;
                false
            } else {
                true
            }
        });
        hit
    }

    /// Visit every cell the segment intersects. The visitor returns `false`
    /// to stop early. Endpoints are canonicalized so traversal is symmetric
    /// in `p0`/`p1`.
    pub fn traverse_segment<F: FnMut(i64, i64) -> bool>(
        &self,
        p0: [f64; 2],
        p1: [f64; 2],
        mut visit: F,
    ) {
        let (a, b) = if (p1[0], p1[1]) < (p0[0], p0[1]) {
            (p1, p0)
        } else {
            (p0, p1)
        };
        let res = self.resolution;
        let ax = (a[0] - self.origin[0]) / res;
        let ay = (a[1] - self.origin[1]) / res;
        let bx = (b[0] - self.origin[0]) / res;
        let by = (b[1] - self.origin[1]) / res;

        let dx = bx - ax;
        let dy = by - ay;

        if dx.abs() < 1e-12 {
            // Vertical (or degenerate) segment: one column scan.
            let i = ax.floor() as i64;
            let (j0, j1) = (ay.min(by).floor() as i64, ay.max(by).floor() as i64);
            for j in j0..=j1 {
                if !visit(i, j) {
                    return;
                }
            }
            return;
        }

        // Column scan: in every grid column the segment spans a y-interval;
        // visiting all rows that interval floors into covers every cell the
        // segment touches, corner clips included.
        let i0 = ax.floor() as i64;
        let i1 = bx.floor() as i64;
        let slope = dy / dx;
        for i in i0..=i1 {
            let xl = (i as f64).max(ax);
            let xr = ((i + 1) as f64).min(bx);
            let yl = ay + (xl - ax) * slope;
            let yr = ay + (xr - ax) * slope;
            let (j0, j1) = (yl.min(yr).floor() as i64, yl.max(yr).floor() as i64);
            for j in j0..=j1 {
                if !visit(i, j) {
                    return;
                }
            }
        }
    }
}

fn parse_header(header: &str) -> Result<(f64, [f64; 2]), MapError> {
    let toks: Vec<&str> = header.split_whitespace().collect();
    let err = |msg: &str| MapError::Parse {
        line: 1,
        msg: msg.to_string(),
    };
    if toks.len() != 5 || toks[0] != "res" || toks[2] != "origin" {
        return Err(err("expected header `res <meters> origin <x> <y>`"));
    }
    let resolution: f64 = toks[1]
        .parse()
        .map_err(|_| err(&format!("bad resolution {:?}", toks[1])))?;
    let ox: f64 = toks[3]
        .parse()
        .map_err(|_| err(&format!("bad origin x {:?}", toks[3])))?;
    let oy: f64 = toks[4]
        .parse()
        .map_err(|_| err(&format!("bad origin y {:?}", toks[4])))?;
    if !(resolution > 0.0) {
        return Err(MapError::InvalidMap(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    Ok((resolution, [ox, oy]))
}
