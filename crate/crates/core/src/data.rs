//! Synthetic ground truth, distance-oracle answers, triplet files and splits.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)`; normal
//! variates use `rand_distr::StandardNormal` (ziggurat). Given the same seed
//! these produce identical streams on every platform.
//!
//! Triplet file format (indices are 0-based):
//!
//! ```text
//! # comments and blank lines are ignored
//! <n>
//! <a> <b> <c>
//! ...
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::triplet::{Query, Triplet};

/// `n` points in `ℝ^d` with i.i.d. standard normal coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub d: usize,
    pub coords: Vec<Vec<f64>>,
    pub seed: u64,
}

impl PointCloud {
    pub fn from_coords(coords: Vec<Vec<f64>>) -> Result<Self> {
        let d = coords.first().map_or(0, Vec::len);
        if coords.len() < 3 || d == 0 || coords.iter().any(|p| p.len() != d) {
            return Err(Error::InvalidDims(
                "need at least 3 points of equal, nonzero dimension".into(),
            ));
        }
        if coords.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("point coordinates"));
        }
        Ok(Self { d, coords, seed: 0 })
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        self.coords[i]
            .iter()
            .zip(&self.coords[j])
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    }

    /// `X Xᵀ`.
    pub fn gram(&self) -> SymMatrix {
        SymMatrix::gram(&self.coords)
    }

    /// CSV with a `d=<d>` header line followed by one row per point.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "d={}", self.d)?;
        for p in &self.coords {
            let row: Vec<String> = p.iter().map(f64::to_string).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        let d: usize = header
            .trim()
            .strip_prefix("d=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("expected `d=<dim>` header, found {header:?}"),
            })?;
        let mut coords = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|tok| tok.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line: i + 2,
                    message: e.to_string(),
                })?;
            if row.len() != d {
                return Err(Error::Parse {
                    line: i + 2,
                    message: format!("expected {d} coordinates, found {}", row.len()),
                });
            }
            coords.push(row);
        }
        Self::from_coords(coords)
    }
}

/// Draws a deterministic standard-normal point cloud.
pub fn gen_points(n: usize, d: usize, seed: u64) -> Result<PointCloud> {
    if n < 3 || d < 1 {
        return Err(Error::InvalidDims(format!(
            "need n >= 3 and d >= 1, got n = {n}, d = {d}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = (0..n)
        .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    Ok(PointCloud { d, coords, seed })
}

/// Answers `q` by Euclidean distance. On an exact tie the lower-indexed
/// option is reported as the closer one.
pub fn oracle_answer(cloud: &PointCloud, q: &Query) -> Result<Triplet> {
    q.check(cloud.n())?;
    let [x, y] = q.options;
    let (dx, dy) = (cloud.sq_dist(q.head, x), cloud.sq_dist(q.head, y));
    let x_closer = dx < dy || (dx == dy && x < y);
    let (b, c) = if x_closer { (x, y) } else { (y, x) };
    Ok(Triplet { a: q.head, b, c })
}

/// Number of distinct queries over `n` objects: `n (n−1) (n−2) / 2`.
pub fn query_count(n: usize) -> usize {
    if n < 3 {
        0
    } else {
        n * (n - 1) * (n - 2) / 2
    }
}

/// Every query, one per head and unordered option pair, enumerated lazily.
pub fn all_queries(n: usize) -> impl Iterator<Item = Query> {
    (0..n).flat_map(move |head| {
        (0..n).filter(move |&o1| o1 != head).flat_map(move |o1| {
            ((o1 + 1)..n)
                .filter(move |&o2| o2 != head)
                .map(move |o2| Query {
                    head,
                    options: [o1, o2],
                })
        })
    })
}

/// `count` i.i.d. uniform queries: uniform head, then a uniform unordered
/// pair among the remaining objects. Duplicates are possible.
pub fn sample_queries(n: usize, count: usize, seed: u64) -> Result<Vec<Query>> {
    if n < 3 {
        return Err(Error::InvalidDims(format!("need n >= 3, got {n}")));
    }
    if count == 0 {
        return Err(Error::InvalidDims("count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| random_query(&mut rng, n)).collect())
}

/// One uniform query from `rng`.
pub fn random_query<R: Rng>(rng: &mut R, n: usize) -> Query {
    let head = rng.random_range(0..n);
    // Draw from the n-1 non-head objects, then from the n-2 left over.
    let skip = |x: usize, gap: usize| if x >= gap { x + 1 } else { x };
    let o1 = skip(rng.random_range(0..n - 1), head);
    let (lo, hi) = (head.min(o1), head.max(o1));
    let o2 = skip(skip(rng.random_range(0..n - 2), lo), hi);
    Query {
        head,
        options: [o1.min(o2), o1.max(o2)],
    }
}

/// Answers every query with the distance oracle.
pub fn answer_all<'a, I>(cloud: &'a PointCloud, queries: I) -> Result<Vec<Triplet>>
where
    I: IntoIterator<Item = Query> + 'a,
{
    queries.into_iter().map(|q| oracle_answer(cloud, &q)).collect()
}

/// Rows of a triplet file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TripletFile {
    pub n_declared: usize,
    pub rows: Vec<Triplet>,
}

pub fn parse_triplets<R: BufRead>(r: R) -> Result<TripletFile> {
    let mut n_declared: Option<usize> = None;
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let perr = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let fields: Vec<&str> = content.split_whitespace().collect();
        match n_declared {
            None => {
                if fields.len() != 1 {
                    return Err(perr(format!(
                        "expected the object count, found {content:?}"
                    )));
                }
                let n: usize = fields[0]
                    .parse()
                    .map_err(|_| perr(format!("invalid object count {:?}", fields[0])))?;
                if n < 3 {
                    return Err(perr(format!("object count must be at least 3, got {n}")));
                }
                n_declared = Some(n);
            }
            Some(n) => {
                if fields.len() != 3 {
                    return Err(perr(format!(
                        "expected three indices `a b c`, found {} fields",
                        fields.len()
                    )));
                }
                let mut idx = [0usize; 3];
                for (slot, f) in idx.iter_mut().zip(&fields) {
                    *slot = f
                        .parse()
                        .map_err(|_| perr(format!("invalid index {f:?}")))?;
                }
                let t = Triplet {
                    a: idx[0],
                    b: idx[1],
                    c: idx[2],
                };
                t.check(n).map_err(|e| perr(e.to_string()))?;
                rows.push(t);
            }
        }
    }
    let n_declared = n_declared.ok_or(Error::Parse {
        line: 0,
        message: "missing object count".into(),
    })?;
    Ok(TripletFile { n_declared, rows })
}

pub fn load_triplets(path: impl AsRef<Path>) -> Result<TripletFile> {
    parse_triplets(BufReader::new(File::open(path)?))
}

pub fn write_triplets<W: Write>(mut w: W, n: usize, rows: &[Triplet]) -> Result<()> {
    writeln!(w, "{n}")?;
    for t in rows {
        writeln!(w, "{} {} {}", t.a, t.b, t.c)?;
    }
    Ok(())
}

/// Layout of an external comparison table for [`convert_table`].
///
/// Each record holds one judgement: an anchor, the item judged closer to it
/// and the item judged farther. Fields are either integer indices or
/// arbitrary labels (for example artist names), selected by `labels`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableFormat {
    pub delimiter: u8,
    pub has_header: bool,
    /// Zero-based column positions of anchor, closer and farther item.
    pub columns: [usize; 3],
    /// Integer fields count from one instead of zero.
    pub one_based: bool,
    /// Fields are names; indices are assigned in order of first appearance.
    pub labels: bool,
}

impl Default for TableFormat {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: false,
            columns: [0, 1, 2],
            one_based: false,
            labels: false,
        }
    }
}

/// Result of [`convert_table`]: triplets plus the label of every index when
/// the source used names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvertedTable {
    pub file: TripletFile,
    pub labels: Option<Vec<String>>,
}

/// Reads an external comparison table into the triplet representation.
/// Lines starting with `#` are skipped. Rows repeating an object are
/// rejected with their line number.
pub fn convert_table<R: std::io::Read>(r: R, format: &TableFormat) -> Result<ConvertedTable> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .has_headers(format.has_header)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut names: Vec<String> = Vec::new();
    let mut index_of: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut rows = Vec::new();
    let mut max_index = 0usize;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let perr = |message: String| Error::Parse { line, message };
        let mut idx = [0usize; 3];
        for (slot, &col) in idx.iter_mut().zip(&format.columns) {
            let field = record
                .get(col)
                .ok_or_else(|| perr(format!("missing column {col}")))?;
            *slot = if format.labels {
                *index_of.entry(field.to_string()).or_insert_with(|| {
                    names.push(field.to_string());
                    names.len() - 1
                })
            } else {
                let v: usize = field
                    .parse()
                    .map_err(|_| perr(format!("invalid index {field:?}")))?;
                if format.one_based {
                    v.checked_sub(1)
                        .ok_or_else(|| perr("index 0 in a one-based table".into()))?
                } else {
                    v
                }
            };
        }
        let t = Triplet {
            a: idx[0],
            b: idx[1],
            c: idx[2],
        };
        if t.a == t.b || t.a == t.c || t.b == t.c {
            return Err(perr(format!("row {t} repeats an object")));
        }
        max_index = max_index.max(t.a).max(t.b).max(t.c);
        rows.push(t);
    }
    if rows.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = if format.labels { names.len() } else { max_index + 1 };
    Ok(ConvertedTable {
        file: TripletFile { n_declared: n, rows },
        labels: format.labels.then_some(names),
    })
}

/// Train / validation / test partition.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<Triplet>,
    pub val: Vec<Triplet>,
    pub test: Vec<Triplet>,
}

/// Seeded shuffle of `rows`, then consecutive slices of the requested sizes.
/// `test = None` takes everything left after train and validation.
pub fn split(
    rows: &[Triplet],
    train: usize,
    val: usize,
    test: Option<usize>,
    seed: u64,
) -> Result<Split> {
    let total = rows.len();
    let requested = train + val + test.unwrap_or(0);
    if requested > total {
        return Err(Error::CountOverflow {
            requested,
            available: total,
        });
    }
    let test = test.unwrap_or(total - train - val);
    let mut order: Vec<usize> = (0..total).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let take = |range: std::ops::Range<usize>| -> Vec<Triplet> {
        order[range].iter().map(|&i| rows[i]).collect()
    };
    Ok(Split {
        train: take(0..train),
        val: take(train..train + val),
        test: take(train + val..train + val + test),
    })
}

/// Same as [`split`] with sizes given as fractions of the row count,
/// rounded down.
pub fn split_fractions(
    rows: &[Triplet],
    train: f64,
    val: f64,
    test: f64,
    seed: u64,
) -> Result<Split> {
    if [train, val, test].iter().any(|f| !(0.0..=1.0).contains(f)) || train + val + test > 1.0 + 1e-12 {
        return Err(Error::Config(format!(
            "fractions must be in [0, 1] and sum to at most 1: {train}, {val}, {test}"
        )));
    }
    let total = rows.len() as f64;
    let count = |f: f64| (f * total).floor() as usize;
    split(rows, count(train), count(val), Some(count(test)), seed)
}
