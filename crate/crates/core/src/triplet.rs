use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered comparison `(a, b, c)`: object `a` is more similar to `b` than to `c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet {
    pub a: usize,
    pub b: usize,
    pub c: usize,
}

impl Triplet {
    /// Checked constructor; indices must be pairwise distinct.
    pub fn new(a: usize, b: usize, c: usize) -> Result<Self> {
        if a == b || a == c || b == c {
            return Err(Error::DegenerateTriplet { a, b, c });
        }
        Ok(Self { a, b, c })
    }

    /// Validates distinctness and that every index is below `n`.
    pub fn check(&self, n: usize) -> Result<()> {
        for index in [self.a, self.b, self.c] {
            if index >= n {
                return Err(Error::IndexOutOfRange { index, n });
            }
        }
        if self.a == self.b || self.a == self.c || self.b == self.c {
            return Err(Error::DegenerateTriplet {
                a: self.a,
                b: self.b,
                c: self.c,
            });
        }
        Ok(())
    }

    /// The same query answered the other way.
    pub fn flipped(&self) -> Self {
        Self {
            a: self.a,
            b: self.c,
            c: self.b,
        }
    }

    pub fn query(&self) -> Query {
        Query {
            head: self.a,
            options: [self.b, self.c],
        }
    }
}

impl fmt::Display for Triplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.a, self.b, self.c)
    }
}

/// A relative-comparison question: is `head` closer to `options[0]` or `options[1]`?
///
/// The option pair is unordered; equality and hashing go through
/// [`Query::canonical`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Query {
    pub head: usize,
    pub options: [usize; 2],
}

impl Query {
    pub fn new(head: usize, o1: usize, o2: usize) -> Result<Self> {
        if head == o1 || head == o2 || o1 == o2 {
            return Err(Error::DegenerateTriplet { a: head, b: o1, c: o2 });
        }
        Ok(Self {
            head,
            options: [o1, o2],
        })
    }

    /// Same query with options sorted ascending.
    pub fn canonical(&self) -> Self {
        let [x, y] = self.options;
        Self {
            head: self.head,
            options: [x.min(y), x.max(y)],
        }
    }

    /// Triplet stating that `chosen` is the closer option.
    pub fn answer(&self, chosen: usize) -> Result<Triplet> {
        let [x, y] = self.options;
        if chosen == x {
            Ok(Triplet { a: self.head, b: x, c: y })
        } else if chosen == y {
            Ok(Triplet { a: self.head, b: y, c: x })
        } else {
            Err(Error::Config(format!(
                "object {chosen} is not an option of query {self}"
            )))
        }
    }

    pub fn check(&self, n: usize) -> Result<()> {
        Triplet {
            a: self.head,
            b: self.options[0],
            c: self.options[1],
        }
        .check(n)
    }
}

impl PartialEq for Query {
    fn eq(&self, other: &Self) -> bool {
        let (l, r) = (self.canonical(), other.canonical());
        l.head == r.head && l.options == r.options
    }
}

impl Eq for Query {}

impl std::hash::Hash for Query {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        let c = self.canonical();
        c.head.hash(state);
        c.options.hash(state);
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {{{}, {}}})", self.head, self.options[0], self.options[1])
    }
}
