use crate::error::{Error, Result};

/// A `C x F x H x W` feature tensor, stored channel-major: entry
/// `(c, l)` lives at `c * L + l` where `l` runs over the `L = F * H * W`
/// spatiotemporal locations.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    frames: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, frames: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || frames == 0 || height == 0 || width == 0 {
            return Err(Error::contract(format!(
                "feature map dimensions must be >= 1, got {channels}x{frames}x{height}x{width}"
            )));
        }
        let expected = channels * frames * height * width;
        if data.len() != expected {
            return Err(Error::contract(format!(
                "feature map needs {expected} entries, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("feature map has non-finite entries"));
        }
        Ok(Self {
            channels,
            frames,
            height,
            width,
            data,
        })
    }

    /// A map with `L = locations.len()` locations laid out along the frame axis.
    pub fn from_locations(locations: &[Vec<f64>]) -> Result<Self> {
        let l = locations.len();
        let c = locations.first().map_or(0, Vec::len);
        if locations.iter().any(|v| v.len() != c) {
            return Err(Error::contract("locations have different channel counts"));
        }
        let mut data = vec![0.0; c * l];
        for (i, v) in locations.iter().enumerate() {
            for (ch, x) in v.iter().enumerate() {
                data[ch * l + i] = *x;
            }
        }
        Self::new(c, l, 1, 1, data)
    }

    pub fn zeros_like(other: &FeatureMap) -> Self {
        Self {
            data: vec![0.0; other.data.len()],
            ..other.clone()
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn locations(&self) -> usize {
        self.frames * self.height * self.width
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.channels, self.frames, self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, channel: usize, location: usize) -> f64 {
        self.data[channel * self.locations() + location]
    }

    /// The `C`-vector at one location.
    pub fn location(&self, location: usize) -> Vec<f64> {
        let l = self.locations();
        (0..self.channels).map(|c| self.data[c * l + location]).collect()
    }

    /// Same tensor with new entries (used by finite-difference checks).
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(self.channels, self.frames, self.height, self.width, data)
    }

    /// Copy with locations reordered: location `i` of the result is location
    /// `perm[i]` of `self`.
    pub fn permute_locations(&self, perm: &[usize]) -> Result<Self> {
        let l = self.locations();
        let mut seen = vec![false; l];
        if perm.len() != l || perm.iter().any(|&p| p >= l || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::contract("not a permutation of the locations"));
        }
        let mut data = vec![0.0; self.data.len()];
        for c in 0..self.channels {
            for (i, &p) in perm.iter().enumerate() {
                data[c * l + i] = self.data[c * l + p];
            }
        }
        self.with_data(data)
    }

    /// Copy with the vector at location `i` multiplied by `scales[i]`.
    pub fn scale_locations(&self, scales: &[f64]) -> Result<Self> {
        let l = self.locations();
        if scales.len() != l {
            return Err(Error::contract("one scale per location required"));
        }
        let mut data = self.data.clone();
        for c in 0..self.channels {
            for (i, s) in scales.iter().enumerate() {
                data[c * l + i] *= s;
            }
        }
        self.with_data(data)
    }
}
