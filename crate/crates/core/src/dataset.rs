//! The 44-image O/N/L/X task: four training glyphs and forty test images,
//! each test image being its class glyph with exactly two pixels inverted.
//!
//! Text format, one section per split:
//!
//! ```text
//! train
//! label O
//! #####
//! #...#
//! ...
//! test
//! label O
//! ...
//! ```
//!
//! `#` is +1 and `.` is -1. Blank lines are ignored.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SIDE: usize = 5;
pub const PIXELS: usize = SIDE * SIDE;
pub const TEST_PER_CLASS: usize = 10;

const GLYPHS: &str = include_str!("../assets/glyphs_v1.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    O,
    N,
    L,
    X,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::O, Label::N, Label::L, Label::X];

    pub fn token(self) -> &'static str {
        match self {
            Label::O => "O",
            Label::N => "N",
            Label::L => "L",
            Label::X => "X",
        }
    }

    pub fn from_token(s: &str) -> Option<Label> {
        Label::ALL.into_iter().find(|l| l.token() == s)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Bipolar targets of the two output neurons for a label.
pub fn label_to_outputs(label: Label) -> [i8; 2] {
    match label {
        Label::O => [-1, -1],
        Label::N => [-1, 1],
        Label::L => [1, 1],
        Label::X => [1, -1],
    }
}

pub fn outputs_to_label(outputs: [i8; 2]) -> Label {
    match outputs {
        [-1, -1] => Label::O,
        [-1, 1] => Label::N,
        [1, 1] => Label::L,
        [1, -1] => Label::X,
        other => panic!("outputs must be bipolar, got {other:?}"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Image {
    /// Row-major bipolar pixels.
    pub pixels: [i8; PIXELS],
    pub label: Label,
}

impl Image {
    pub fn hamming(&self, other: &Image) -> usize {
        self.pixels
            .iter()
            .zip(other.pixels.iter())
            .filter(|(a, b)| a != b)
            .count()
    }

    fn with_inverted(&self, a: usize, b: usize) -> Image {
        let mut out = self.clone();
        out.pixels[a] = -out.pixels[a];
        out.pixels[b] = -out.pixels[b];
        out
    }

    pub fn to_sample(&self) -> Sample {
        Sample {
            inputs: self.pixels.to_vec(),
            targets: label_to_outputs(self.label).to_vec(),
        }
    }
}

/// One training datapoint: bipolar input activations (one per input node, in
/// input order) and bipolar targets for the output nodes (in output order).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub inputs: Vec<i8>,
    pub targets: Vec<i8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub train: Vec<Image>,
    pub test: Vec<Image>,
}

impl Dataset {
    pub fn train_samples(&self) -> Vec<Sample> {
        self.train.iter().map(Image::to_sample).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Dataset> {
        Dataset::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (section, images) in [("train", &self.train), ("test", &self.test)] {
            out.push_str(section);
            out.push('\n');
            for img in images.iter() {
                write_image(&mut out, img);
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Dataset> {
        let mut train = Vec::new();
        let mut test = Vec::new();
        let mut section: Option<bool> = None; // Some(true) = train
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end()))
            .filter(|(_, l)| !l.trim().is_empty())
            .peekable();
        while let Some((line_no, line)) = lines.next() {
            match line.trim() {
                "train" => section = Some(true),
                "test" => section = Some(false),
                _ => {
                    let is_train = section.ok_or_else(|| Error::Parse {
                        line: line_no,
                        column: 1,
                        message: "expected section header 'train' or 'test'".into(),
                    })?;
                    let img = parse_image(line_no, line, &mut lines)?;
                    if is_train {
                        train.push(img);
                    } else {
                        test.push(img);
                    }
                }
            }
        }
        Ok(Dataset { train, test })
    }
}

fn write_image(out: &mut String, img: &Image) {
    out.push_str("label ");
    out.push_str(img.label.token());
    out.push('\n');
    for row in img.pixels.chunks(SIDE) {
        for &p in row {
            out.push(if p > 0 { '#' } else { '.' });
        }
        out.push('\n');
    }
}

fn parse_header(line_no: usize, line: &str) -> Result<Label> {
    let mut parts = line.split_whitespace();
    match parts.next() {
        Some("label") => {}
        _ => {
            return Err(Error::Parse {
                line: line_no,
                column: 1,
                message: format!("expected 'label <O|N|L|X>', found {line:?}"),
            })
        }
    }
    let token = parts.next().ok_or_else(|| Error::Parse {
        line: line_no,
        column: line.len() + 1,
        message: "missing label token".into(),
    })?;
    let column = line.find(token).map_or(1, |c| c + 1);
    let label = Label::from_token(token).ok_or_else(|| Error::Parse {
        line: line_no,
        column,
        message: format!("unknown label {token:?}"),
    })?;
    if let Some(extra) = parts.next() {
        return Err(Error::Parse {
            line: line_no,
            column: line.rfind(extra).map_or(1, |c| c + 1),
            message: format!("unexpected token {extra:?}"),
        });
    }
    Ok(label)
}

fn parse_image<'a, I>(line_no: usize, header: &str, lines: &mut I) -> Result<Image>
where
    I: Iterator<Item = (usize, &'a str)>,
{
    let label = parse_header(line_no, header)?;
    let mut pixels = [0i8; PIXELS];
    for row in 0..SIDE {
        let (row_line, text) = lines.next().ok_or(Error::Dimension {
            line: line_no + row + 1,
            expected: SIDE,
            found: 0,
        })?;
        let cells: Vec<char> = text.trim().chars().collect();
        if cells.iter().all(|c| matches!(c, '#' | '.')) && cells.len() != SIDE {
            return Err(Error::Dimension {
                line: row_line,
                expected: SIDE,
                found: cells.len(),
            });
        }
        for (col, c) in cells.iter().enumerate() {
            pixels[row * SIDE + col] = match c {
                '#' => 1,
                '.' => -1,
                other => {
                    return Err(Error::Parse {
                        line: row_line,
                        column: col + 1,
                        message: format!("unexpected pixel character {other:?}"),
                    })
                }
            };
        }
    }
    Ok(Image { pixels, label })
}

/// The four training glyphs, one per class, in `Label::ALL` order.
pub fn canonical_glyphs() -> Vec<Image> {
    let ds = Dataset::from_text(&format!("train\n{GLYPHS}")).expect("glyph asset is well formed");
    debug_assert_eq!(ds.train.len(), 4);
    ds.train
}

/// Builds the dataset: canonical glyphs for training and, per class, ten
/// distinct two-pixel inversions drawn from a generator seeded by `seed`.
pub fn generate_canonical(seed: u64) -> Dataset {
    let train = canonical_glyphs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = Vec::with_capacity(train.len() * TEST_PER_CLASS);
    for glyph in &train {
        let mut pairs = BTreeSet::new();
        let mut picked = Vec::with_capacity(TEST_PER_CLASS);
        while picked.len() < TEST_PER_CLASS {
            let a = rng.gen_range(0..PIXELS);
            let b = rng.gen_range(0..PIXELS);
            if a == b {
                continue;
            }
            let pair = (a.min(b), a.max(b));
            if pairs.insert(pair) {
                picked.push(pair);
            }
        }
        test.extend(picked.into_iter().map(|(a, b)| glyph.with_inverted(a, b)));
    }
    Dataset { train, test }
}
