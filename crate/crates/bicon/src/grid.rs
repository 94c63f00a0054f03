//! Dense pixel containers: binary masks, scalar maps, and 8-channel grids.
//!
//! All three are row-major. `ConnGrid` stores its 8 direction channels
//! innermost, i.e. `(y, x, c)` order, which is also the on-disk layout of
//! connectivity files.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Number of direction channels in a connectivity grid.
pub const CHANNELS: usize = 8;

/// H×W binary mask; every element is exactly 0 or 1.
///
/// Used both for saliency ground truth and for edge masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl Mask {
    /// Build a mask from raw 0/1 values.
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::EmptyInput);
        }
        assert_eq!(data.len(), height * width, "mask data length");
        let bad = data.iter().filter(|&&v| v > 1).count();
        if bad > 0 {
            return Err(Error::NotBinary { count: bad });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// All-background mask.
    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: u8) {
        debug_assert!(v <= 1);
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// Number of pixels set to 1.
    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn same_shape(&self, height: usize, width: usize) -> Result<()> {
        if self.height != height || self.width != width {
            return Err(Error::ShapeMismatch {
                expected_h: height,
                expected_w: width,
                got_h: self.height,
                got_w: self.width,
            });
        }
        Ok(())
    }

    /// Mask with rows and columns swapped.
    pub fn transposed(&self) -> Mask {
        let mut out = vec![0u8; self.data.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                out[x * self.height + y] = self.get(y, x);
            }
        }
        Mask {
            height: self.width,
            width: self.height,
            data: out,
        }
    }
}

/// H×W scalar field: saliency maps, aggregated maps, per-pixel loss
/// surfaces, and gradients with respect to any of those.
#[derive(Debug, Clone, PartialEq)]
pub struct Map<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Real> Map<T> {
    pub fn filled(height: usize, width: usize, v: T) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::EmptyInput);
        }
        Ok(Self {
            height,
            width,
            data: vec![v; height * width],
        })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::filled(height, width, T::zero())
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::EmptyInput);
        }
        assert_eq!(data.len(), height * width, "map data length");
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Real-valued view of a binary mask (0.0 / 1.0).
    pub fn from_mask(mask: &Mask) -> Self {
        Self {
            height: mask.height(),
            width: mask.width(),
            data: mask
                .data()
                .iter()
                .map(|&v| if v == 1 { T::one() } else { T::zero() })
                .collect(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn mean(&self) -> T {
        let sum = self.data.iter().fold(T::zero(), |a, &b| a + b);
        sum / T::from_count(self.data.len())
    }

    pub fn same_shape(&self, height: usize, width: usize) -> Result<()> {
        if self.height != height || self.width != width {
            return Err(Error::ShapeMismatch {
                expected_h: height,
                expected_w: width,
                got_h: self.height,
                got_w: self.width,
            });
        }
        Ok(())
    }

    /// Map with rows and columns swapped.
    pub fn transposed(&self) -> Map<T> {
        let mut out = vec![T::zero(); self.data.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                out[x * self.height + y] = self.get(y, x);
            }
        }
        Map {
            height: self.width,
            width: self.height,
            data: out,
        }
    }
}

/// H×W×8 grid of per-direction values.
///
/// The same container holds binary connectivity labels, continuous
/// connectivity maps, bilaterally-voted maps, and gradients with respect to
/// any of them; operations that require binary or unit-interval contents
/// validate at their own boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnGrid<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Real> ConnGrid<T> {
    pub fn filled(height: usize, width: usize, v: T) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::EmptyInput);
        }
        Ok(Self {
            height,
            width,
            data: vec![v; height * width * CHANNELS],
        })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::filled(height, width, T::zero())
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::EmptyInput);
        }
        assert_eq!(data.len(), height * width * CHANNELS, "grid data length");
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn idx(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * CHANNELS + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> T {
        self.data[self.idx(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: T) {
        let i = self.idx(y, x, c);
        self.data[i] = v;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// The 8-entry connectivity vector of one pixel.
    #[inline]
    pub fn vector(&self, y: usize, x: usize) -> &[T] {
        let base = (y * self.width + x) * CHANNELS;
        &self.data[base..base + CHANNELS]
    }

    /// True when every value is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == T::zero() || v == T::one())
    }

    /// Index of the first value outside [0, 1] (or non-finite), if any.
    pub fn first_out_of_range(&self) -> Option<(usize, T)> {
        self.data
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v >= T::zero() && v <= T::one()))
            .map(|(i, &v)| (i, v))
    }

    pub fn same_shape(&self, height: usize, width: usize) -> Result<()> {
        if self.height != height || self.width != width {
            return Err(Error::ShapeMismatch {
                expected_h: height,
                expected_w: width,
                got_h: self.height,
                got_w: self.width,
            });
        }
        Ok(())
    }

    /// Per-pixel mean over the 8 channels.
    pub fn channel_mean(&self) -> Map<T> {
        let n = T::from_count(CHANNELS);
        let data = self
            .data
            .chunks_exact(CHANNELS)
            .map(|v| v.iter().fold(T::zero(), |a, &b| a + b) / n)
            .collect();
        Map::from_vec(self.height, self.width, data).expect("same nonzero shape")
    }
}
