//! Normalized screen coordinates run over `[-1, 1]` on each axis.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{check_len, Error, Result};

pub const SCREEN_EXTENT: f64 = 2.0;
/// One eighth of the screen extent.
pub const TRANSLATION_OFFSET: f64 = SCREEN_EXTENT / 8.0;

/// Per-axis mirror sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(into = "i8", try_from = "i8"))]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.random::<bool>() {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        match s {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = Error;

    fn try_from(v: i8) -> Result<Self> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            _ => Err(Error::InvalidParameter("mirror sign must be +1 or -1")),
        }
    }
}

/// `h_i -> s_i h_i`.
pub fn apply_mirror(signs: &[Sign], h: &[f64]) -> Result<Vec<f64>> {
    check_len("mirrored input", h, signs.len())?;
    Ok(h.iter().zip(signs).map(|(x, s)| s.value() * x).collect())
}

/// Maps a cursor position to a game action: mirror, then subtract the
/// translation so the screen point of the human optimum lands on the origin.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScreenMap {
    signs: Vec<Sign>,
    offsets: Vec<f64>,
}

impl ScreenMap {
    pub fn identity(axes: usize) -> Self {
        Self {
            signs: alloc::vec![Sign::Plus; axes],
            offsets: alloc::vec![0.0; axes],
        }
    }

    pub fn new(signs: Vec<Sign>, offsets: Vec<f64>) -> Result<Self> {
        check_len("translation offsets", &offsets, signs.len())?;
        crate::error::check_finite("translation offsets", &offsets)?;
        Ok(Self { signs, offsets })
    }

    /// Random `±TRANSLATION_OFFSET` per axis (or none) and random mirror signs (or none).
    pub fn random<R: Rng + ?Sized>(axes: usize, translate: bool, mirror: bool, rng: &mut R) -> Self {
        let offsets = (0..axes)
            .map(|_| {
                if translate {
                    Sign::random(rng).value() * TRANSLATION_OFFSET
                } else {
                    0.0
                }
            })
            .collect();
        let signs = (0..axes)
            .map(|_| if mirror { Sign::random(rng) } else { Sign::Plus })
            .collect();
        Self { signs, offsets }
    }

    pub fn with_signs(&self, signs: Vec<Sign>) -> Result<Self> {
        Self::new(signs, self.offsets.clone())
    }

    pub fn axes(&self) -> usize {
        self.signs.len()
    }

    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Returns the game action and whether the cursor had to be clamped into
    /// the screen.
    pub fn screen_to_game(&self, cursor: &[f64]) -> Result<(Vec<f64>, bool)> {
        check_len("cursor", cursor, self.axes())?;
        let mut clamped = false;
        let h = cursor
            .iter()
            .zip(self.signs.iter().zip(&self.offsets))
            .map(|(&c, (s, o))| {
                let cc = c.clamp(-1.0, 1.0);
                clamped |= cc != c;
                s.value() * cc - o
            })
            .collect();
        Ok((h, clamped))
    }

    /// Inverse of [`screen_to_game`](Self::screen_to_game) for on-screen points.
    pub fn game_to_screen(&self, h: &[f64]) -> Result<Vec<f64>> {
        check_len("game action", h, self.axes())?;
        Ok(h
            .iter()
            .zip(self.signs.iter().zip(&self.offsets))
            .map(|(&x, (s, o))| s.value() * (x + o))
            .collect())
    }
}
