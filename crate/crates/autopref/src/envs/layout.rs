//! Grid layout files: one character per cell (`.` free, `#` blocked, `S`
//! start, lowercase letters for labeled cells) followed by `key <letter>
//! <event>` lines mapping letters to event names. Lines starting with `//`
//! are comments.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EnvError;

/// A parsed grid map: geometry, start cell, and labeled cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridLayout {
    pub width: usize,
    pub height: usize,
    blocked: Vec<bool>,
    start: usize,
    /// Letter per cell, `None` for unlabeled.
    letters: Vec<Option<char>>,
    /// Letter-to-event key, in declaration order.
    key: Vec<(char, String)>,
}

impl GridLayout {
    /// Parses the layout text format.
    pub fn parse(text: &str) -> Result<GridLayout, EnvError> {
        let mut rows: Vec<&str> = Vec::new();
        let mut key: Vec<(char, String)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.is_empty() || line.starts_with("//") {
                continue;
            }
            if let Some(rest) = line.strip_prefix("key ") {
                let mut parts = rest.split_whitespace();
                let (letter, event) = match (parts.next(), parts.next(), parts.next()) {
                    (Some(l), Some(e), None) if l.chars().count() == 1 => {
                        (l.chars().next().unwrap(), e.to_string())
                    }
                    _ => {
                        return Err(EnvError::Layout {
                            line: idx + 1,
                            msg: "expected `key <letter> <event>`".to_string(),
                        })
                    }
                };
                if key.iter().any(|(l, _)| *l == letter) {
                    return Err(EnvError::Layout {
                        line: idx + 1,
                        msg: format!("duplicate key for letter `{letter}`"),
                    });
                }
                key.push((letter, event));
            } else {
                if !key.is_empty() {
                    return Err(EnvError::Layout {
                        line: idx + 1,
                        msg: "grid rows must precede key lines".to_string(),
                    });
                }
                rows.push(line);
            }
        }
        if rows.is_empty() {
            return Err(EnvError::Layout { line: 1, msg: "no grid rows found".to_string() });
        }
        let width = rows[0].chars().count();
        let height = rows.len();
        let mut blocked = vec![false; width * height];
        let mut letters = vec![None; width * height];
        let mut start = None;
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(EnvError::Layout {
                    line: y + 1,
                    msg: format!("row width {} != {} of first row", row.chars().count(), width),
                });
            }
            for (x, c) in row.chars().enumerate() {
                let i = y * width + x;
                match c {
                    '.' => {}
                    '#' => blocked[i] = true,
                    'S' => {
                        if start.replace(i).is_some() {
                            return Err(EnvError::Layout {
                                line: y + 1,
                                msg: "multiple start cells".to_string(),
                            });
                        }
                    }
                    c if c.is_ascii_lowercase() => letters[i] = Some(c),
                    c => {
                        return Err(EnvError::Layout {
                            line: y + 1,
                            msg: format!("unexpected cell character `{c}`"),
                        })
                    }
                }
            }
        }
        let start = start.ok_or(EnvError::Layout {
            line: height,
            msg: "no start cell `S`".to_string(),
        })?;
        let known: HashMap<char, ()> = key.iter().map(|(l, _)| (*l, ())).collect();
        for (i, l) in letters.iter().enumerate() {
            if let Some(l) = l {
                if !known.contains_key(l) {
                    return Err(EnvError::Layout {
                        line: i / width + 1,
                        msg: format!("letter `{l}` has no key entry"),
                    });
                }
            }
        }
        Ok(GridLayout { width, height, blocked, start, letters, key })
    }

    pub fn num_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn is_blocked(&self, cell: usize) -> bool {
        self.blocked[cell]
    }

    pub fn xy(&self, cell: usize) -> (i32, i32) {
        ((cell % self.width) as i32, (cell / self.width) as i32)
    }

    pub fn cell(&self, x: i32, y: i32) -> Option<usize> {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            None
        } else {
            Some(y as usize * self.width + x as usize)
        }
    }

    /// Event name emitted by a cell, if any.
    pub fn event_at(&self, cell: usize) -> Option<&str> {
        let l = self.letters[cell]?;
        self.key.iter().find(|(k, _)| *k == l).map(|(_, e)| e.as_str())
    }

    /// The letter-to-event key in declaration order.
    pub fn key(&self) -> &[(char, String)] {
        &self.key
    }

    /// All cells labeled with `event`.
    pub fn event_cells(&self, event: &str) -> Vec<usize> {
        let letter = match self.key.iter().find(|(_, e)| e == event) {
            Some((l, _)) => *l,
            None => return Vec::new(),
        };
        (0..self.num_cells()).filter(|&i| self.letters[i] == Some(letter)).collect()
    }

    /// Maximum Manhattan distance between two cells of the grid.
    pub fn diameter(&self) -> i32 {
        (self.width as i32 - 1) + (self.height as i32 - 1)
    }

    /// Cells reachable from the start by 4-neighborhood moves over free cells.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.num_cells()];
        let mut queue = vec![self.start];
        seen[self.start] = true;
        while let Some(c) = queue.pop() {
            let (x, y) = self.xy(c);
            for (dx, dy) in [(0, -1), (0, 1), (-1, 0), (1, 0)] {
                if let Some(n) = self.cell(x + dx, y + dy) {
                    if !self.blocked[n] && !seen[n] {
                        seen[n] = true;
                        queue.push(n);
                    }
                }
            }
        }
        seen
    }

    /// True when every labeled cell can be reached from the start.
    pub fn all_subgoals_reachable(&self) -> bool {
        let seen = self.reachable();
        (0..self.num_cells()).all(|i| self.letters[i].is_none() || seen[i])
    }

    /// Generates an enlarged variant of this layout: same letter multiset and
    /// key, new square size, obstacles and subgoal placements drawn
    /// deterministically from `seed`. Layouts with unreachable subgoals are
    /// rejected and redrawn.
    pub fn scaled(&self, size: usize, seed: u64) -> Result<GridLayout, EnvError> {
        if size < self.width.max(self.height) {
            return Err(EnvError::ScaleTooSmall { size, base: self.width.max(self.height) });
        }
        if size == self.width && size == self.height {
            return Ok(self.clone());
        }
        let mut placed_letters: Vec<char> = self.letters.iter().flatten().copied().collect();
        placed_letters.sort_unstable();
        let obstacle_count = (size * size) / 8;

        for attempt in 0u64.. {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt.wrapping_mul(0x9e37_79b9_7f4a_7c15)));
            let n = size * size;
            let mut cells: Vec<usize> = (0..n).collect();
            cells.shuffle(&mut rng);
            let mut letters = vec![None; n];
            let mut blocked = vec![false; n];
            let start = cells[0];
            for (slot, letter) in placed_letters.iter().enumerate() {
                letters[cells[1 + slot]] = Some(*letter);
            }
            let mut placed_obstacles = 0;
            for &c in &cells[1 + placed_letters.len()..] {
                if placed_obstacles == obstacle_count {
                    break;
                }
                if rng.random_range(0..4) > 0 {
                    blocked[c] = true;
                    placed_obstacles += 1;
                }
            }
            let candidate = GridLayout {
                width: size,
                height: size,
                blocked,
                start,
                letters,
                key: self.key.clone(),
            };
            if candidate.all_subgoals_reachable() {
                return Ok(candidate);
            }
        }
        unreachable!("rejection loop always terminates: an unblocked draw is accepted")
    }

    /// Renders the layout back to its text form (grid, blank line, key).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for y in 0..self.height {
            for x in 0..self.width {
                let i = y * self.width + x;
                let c = if i == self.start {
                    'S'
                } else if self.blocked[i] {
                    '#'
                } else {
                    self.letters[i].unwrap_or('.')
                };
                out.push(c);
            }
            out.push('\n');
        }
        out.push('\n');
        for (l, e) in &self.key {
            out.push_str(&format!("key {l} {e}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "// demo\nS.a\n.#b\n\nkey a alpha\nkey b beta\n";

    #[test]
    fn parses_grid_and_key() {
        let l = GridLayout::parse(SMALL).unwrap();
        assert_eq!((l.width, l.height), (3, 2));
        assert_eq!(l.start(), 0);
        assert!(l.is_blocked(4));
        assert_eq!(l.event_at(2), Some("alpha"));
        assert_eq!(l.event_cells("beta"), vec![5]);
        assert_eq!(l.diameter(), 3);
    }

    #[test]
    fn rejects_ragged_rows_and_missing_start() {
        assert!(matches!(GridLayout::parse("S.\n...\n"), Err(EnvError::Layout { .. })));
        assert!(matches!(GridLayout::parse("..\n..\n"), Err(EnvError::Layout { .. })));
        assert!(matches!(GridLayout::parse("S.x\n"), Err(EnvError::Layout { .. })));
    }

    #[test]
    fn reachability_respects_walls() {
        let l = GridLayout::parse("S#a\n\nkey a alpha\n").unwrap();
        assert!(!l.all_subgoals_reachable());
        let l = GridLayout::parse("S.a\n\nkey a alpha\n").unwrap();
        assert!(l.all_subgoals_reachable());
    }

    #[test]
    fn text_round_trip() {
        let l = GridLayout::parse(SMALL).unwrap();
        assert_eq!(GridLayout::parse(&l.to_text()).unwrap(), l);
    }

    #[test]
    fn scaled_is_deterministic_and_reachable() {
        let l = GridLayout::parse(SMALL).unwrap();
        let a = l.scaled(8, 7).unwrap();
        let b = l.scaled(8, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.all_subgoals_reachable());
        assert_eq!(a.key(), l.key());
        // Identity passthrough at the original size.
        let same = GridLayout::parse("S.a\n.b.\n..c\n\nkey a x\nkey b y\nkey c z\n").unwrap();
        assert_eq!(same.scaled(3, 99).unwrap(), same);
        assert!(matches!(same.scaled(2, 0), Err(EnvError::ScaleTooSmall { .. })));
    }
}
