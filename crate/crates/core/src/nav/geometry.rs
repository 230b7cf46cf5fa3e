//! Walls, goal zones, and the geometric predicates the dynamics rest on.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

/// Axis-aligned closed rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    /// Squared distance from a point to this rectangle (0 inside).
    fn distance_sq(&self, x: f64, y: f64) -> f64 {
        let dx = (self.x0 - x).max(0.0).max(x - self.x1);
        let dy = (self.y0 - y).max(0.0).max(y - self.y1);
        dx * dx + dy * dy
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Circle {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let dx = x - self.cx;
        let dy = y - self.cy;
        dx * dx + dy * dy <= self.r * self.r
    }
}

/// The environment: bounds (0,10)², wall rectangles, and goal-zone circles
/// indexed 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct NavGeometry {
    pub walls: Vec<Rect>,
    pub zones: Vec<Circle>,
}

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("wall {0} extends outside the environment bounds")]
    WallOutOfBounds(usize),
    #[error("zone {0} extends outside the environment bounds")]
    ZoneOutOfBounds(usize),
    #[error("zone {zone} intersects wall {wall}")]
    ZoneOnWall { zone: usize, wall: usize },
    #[error("wall {0} has inverted corners")]
    BadWall(usize),
    #[error("zone {0} has non-positive radius")]
    BadZone(usize),
    #[error("zone index {0} out of range")]
    ZoneIndex(usize),
    #[error("{path}:{line}: {what}")]
    Parse {
        path: String,
        line: usize,
        what: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("the grid has no free cells")]
    NoFreeCells,
}

impl NavGeometry {
    /// Side length of the square environment.
    pub const SIZE: f64 = 10.0;

    /// The canonical two-room layout: a dividing wall at x ∈ [4.9, 5.1]
    /// with corridor openings at y ∈ [2,3] and y ∈ [7,8], and six goal
    /// circles of radius 0.5.
    pub fn canonical() -> Self {
        NavGeometry {
            walls: vec![
                Rect::new(4.9, 0.0, 5.1, 2.0),
                Rect::new(4.9, 3.0, 5.1, 7.0),
                Rect::new(4.9, 8.0, 5.1, 10.0),
            ],
            zones: vec![
                Circle { cx: 1.5, cy: 8.5, r: 0.5 },
                Circle { cx: 1.5, cy: 1.5, r: 0.5 },
                Circle { cx: 4.0, cy: 2.5, r: 0.5 },
                Circle { cx: 8.5, cy: 1.5, r: 0.5 },
                Circle { cx: 8.5, cy: 8.5, r: 0.5 },
                Circle { cx: 4.0, cy: 7.5, r: 0.5 },
            ],
        }
    }

    pub fn n_zones(&self) -> usize {
        self.zones.len()
    }

    /// Zone circle by 1-based index.
    pub fn zone(&self, index: usize) -> Result<&Circle, GeometryError> {
        index
            .checked_sub(1)
            .and_then(|i| self.zones.get(i))
            .ok_or(GeometryError::ZoneIndex(index))
    }

    pub fn in_bounds(&self, x: f64, y: f64) -> bool {
        x > 0.0 && x < Self::SIZE && y > 0.0 && y < Self::SIZE
    }

    pub fn in_wall(&self, x: f64, y: f64) -> bool {
        self.walls.iter().any(|w| w.contains(x, y))
    }

    /// True when the straight segment from `p` to `q` touches any wall.
    pub fn segment_blocked(&self, p: (f64, f64), q: (f64, f64)) -> bool {
        self.walls.iter().any(|w| segment_hits_rect(p, q, w))
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bounds = Rect::new(0.0, 0.0, Self::SIZE, Self::SIZE);
        for (i, w) in self.walls.iter().enumerate() {
            if w.x0 > w.x1 || w.y0 > w.y1 {
                return Err(GeometryError::BadWall(i));
            }
            if !(bounds.contains(w.x0, w.y0) && bounds.contains(w.x1, w.y1)) {
                return Err(GeometryError::WallOutOfBounds(i));
            }
        }
        for (i, z) in self.zones.iter().enumerate() {
            if z.r <= 0.0 {
                return Err(GeometryError::BadZone(i + 1));
            }
            if z.cx - z.r <= 0.0
                || z.cx + z.r >= Self::SIZE
                || z.cy - z.r <= 0.0
                || z.cy + z.r >= Self::SIZE
            {
                return Err(GeometryError::ZoneOutOfBounds(i + 1));
            }
            for (j, w) in self.walls.iter().enumerate() {
                if w.distance_sq(z.cx, z.cy) <= z.r * z.r {
                    return Err(GeometryError::ZoneOnWall { zone: i + 1, wall: j });
                }
            }
        }
        Ok(())
    }

    /// Line-based text form: `wall x0 y0 x1 y1` and `zone i cx cy r`
    /// records, `#` comments.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# navigation geometry\n");
        for w in &self.walls {
            let _ = writeln!(out, "wall {} {} {} {}", w.x0, w.y0, w.x1, w.y1);
        }
        for (i, z) in self.zones.iter().enumerate() {
            let _ = writeln!(out, "zone {} {} {} {}", i + 1, z.cx, z.cy, z.r);
        }
        out
    }

    pub fn write_file(&self, path: &Path) -> Result<(), GeometryError> {
        std::fs::write(path, self.to_text()).map_err(|source| GeometryError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, GeometryError> {
        let text = std::fs::read_to_string(path).map_err(|source| GeometryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, GeometryError> {
        let mut walls = Vec::new();
        let mut zones: Vec<(usize, Circle)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |what: String| GeometryError::Parse {
                path: origin.to_string(),
                line: lineno + 1,
                what,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields[0] {
                "wall" => {
                    if fields.len() != 5 {
                        return Err(err("wall wants 4 numbers".into()));
                    }
                    let v: Result<Vec<f64>, _> =
                        fields[1..].iter().map(|f| f.parse::<f64>()).collect();
                    let v = v.map_err(|e| err(format!("bad number: {e}")))?;
                    walls.push(Rect::new(v[0], v[1], v[2], v[3]));
                }
                "zone" => {
                    if fields.len() != 5 {
                        return Err(err("zone wants an index and 3 numbers".into()));
                    }
                    let idx: usize =
                        fields[1].parse().map_err(|e| err(format!("bad index: {e}")))?;
                    let v: Result<Vec<f64>, _> =
                        fields[2..].iter().map(|f| f.parse::<f64>()).collect();
                    let v = v.map_err(|e| err(format!("bad number: {e}")))?;
                    zones.push((idx, Circle { cx: v[0], cy: v[1], r: v[2] }));
                }
                other => return Err(err(format!("unknown record `{other}`"))),
            }
        }
        zones.sort_by_key(|&(i, _)| i);
        for (slot, &(i, _)) in zones.iter().enumerate() {
            if i != slot + 1 {
                return Err(GeometryError::Parse {
                    path: origin.to_string(),
                    line: 0,
                    what: format!("zone indices must be 1..={}, got {i}", zones.len()),
                });
            }
        }
        let geo = NavGeometry {
            walls,
            zones: zones.into_iter().map(|(_, z)| z).collect(),
        };
        geo.validate()?;
        Ok(geo)
    }
}

/// Slab (Liang–Barsky) test: does `p + t(q−p)`, t ∈ [0,1], meet the rect?
fn segment_hits_rect(p: (f64, f64), q: (f64, f64), rect: &Rect) -> bool {
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for (start, delta, lo, hi) in [
        (p.0, q.0 - p.0, rect.x0, rect.x1),
        (p.1, q.1 - p.1, rect.y0, rect.y1),
    ] {
        if delta == 0.0 {
            if start < lo || start > hi {
                return false;
            }
            continue;
        }
        let mut ta = (lo - start) / delta;
        let mut tb = (hi - start) / delta;
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return false;
        }
    }
    true
}
