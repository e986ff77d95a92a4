//! Quaternion and real feature-map containers.
//!
//! A [`QTensor`] holds `C` quaternion channels over an `H x W` grid as four
//! contiguous real planes per channel, in the fixed `(r, x, y, z)` component
//! order: plane `(c, comp)` starts at `(c * 4 + comp) * H * W`. The
//! plane-separated layout lets the quaternion convolution run as plain loops
//! over real planes and makes the block-matrix comparison with the real
//! baseline a pure reindexing.

use crate::error::{Error, Result};
use crate::quat::Quaternion;

/// `C` quaternion channels of size `H x W`; `4 * C * H * W` real scalars.
#[derive(Clone, Debug, PartialEq)]
pub struct QTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

/// `C` real channels of size `H x W`, channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RealTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

fn check_dims(c: usize, h: usize, w: usize) -> Result<()> {
    if c == 0 || h == 0 || w == 0 {
        return Err(Error::shape(format!(
            "tensor dimensions must be positive, got ({c}, {h}, {w})"
        )));
    }
    Ok(())
}

impl QTensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        check_dims(channels, height, width)?;
        Ok(QTensor {
            channels,
            height,
            width,
            data: vec![0.0; 4 * channels * height * width],
        })
    }

    pub fn from_data(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(channels, height, width)?;
        if data.len() != 4 * channels * height * width {
            return Err(Error::shape(format!(
                "data length {} does not match 4*{channels}*{height}*{width}",
                data.len()
            )));
        }
        Ok(QTensor {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn check_index(&self, c: usize, i: usize, j: usize) -> Result<()> {
        if c >= self.channels || i >= self.height || j >= self.width {
            return Err(Error::bounds(format!(
                "index ({c}, {i}, {j}) outside shape {:?}",
                self.shape()
            )));
        }
        Ok(())
    }

    /// Plane of one component of one channel, `height * width` scalars.
    pub fn plane(&self, c: usize, comp: usize) -> &[f64] {
        let hw = self.height * self.width;
        let base = (c * 4 + comp) * hw;
        &self.data[base..base + hw]
    }

    pub fn plane_mut(&mut self, c: usize, comp: usize) -> &mut [f64] {
        let hw = self.height * self.width;
        let base = (c * 4 + comp) * hw;
        &mut self.data[base..base + hw]
    }

    pub fn get(&self, c: usize, i: usize, j: usize) -> Result<Quaternion> {
        self.check_index(c, i, j)?;
        let hw = self.height * self.width;
        let at = i * self.width + j;
        let base = c * 4 * hw;
        Ok(Quaternion::new(
            self.data[base + at],
            self.data[base + hw + at],
            self.data[base + 2 * hw + at],
            self.data[base + 3 * hw + at],
        ))
    }

    pub fn set(&mut self, c: usize, i: usize, j: usize, q: Quaternion) -> Result<()> {
        self.check_index(c, i, j)?;
        let hw = self.height * self.width;
        let at = i * self.width + j;
        let base = c * 4 * hw;
        self.data[base + at] = q.r;
        self.data[base + hw + at] = q.x;
        self.data[base + 2 * hw + at] = q.y;
        self.data[base + 3 * hw + at] = q.z;
        Ok(())
    }

    /// Reorder into a real tensor of shape `(4C, H, W)` where real channel `k`
    /// is component `k / C` of quaternion channel `k % C`: all r-planes first,
    /// then all x-, y-, z-planes.
    pub fn to_real_blocks(&self) -> RealTensor {
        let hw = self.height * self.width;
        let mut data = vec![0.0; 4 * self.channels * hw];
        for comp in 0..4 {
            for c in 0..self.channels {
                let dst = (comp * self.channels + c) * hw;
                data[dst..dst + hw].copy_from_slice(self.plane(c, comp));
            }
        }
        RealTensor {
            channels: 4 * self.channels,
            height: self.height,
            width: self.width,
            data,
        }
    }

    /// Exact inverse of [`QTensor::to_real_blocks`]. The real channel count
    /// must be divisible by 4.
    pub fn from_real_blocks(t: &RealTensor) -> Result<QTensor> {
        if t.channels % 4 != 0 {
            return Err(Error::shape(format!(
                "real channel count {} is not divisible by 4",
                t.channels
            )));
        }
        let c = t.channels / 4;
        let mut out = QTensor::zeros(c, t.height, t.width)?;
        for comp in 0..4 {
            for ch in 0..c {
                let src = t.channel((comp * c) + ch);
                out.plane_mut(ch, comp).copy_from_slice(src);
            }
        }
        Ok(out)
    }

    fn check_same_shape(&self, other: &QTensor) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(format!(
                "shape mismatch: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &QTensor) -> Result<QTensor> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> QTensor {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= s;
        }
        out
    }

    pub fn hadamard(&self, other: &QTensor) -> Result<QTensor> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a *= b;
        }
        Ok(out)
    }

    /// Apply `f` to every real component (split semantics).
    pub fn map(&self, f: impl Fn(f64) -> f64) -> QTensor {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v = f(*v);
        }
        out
    }
}

impl RealTensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        check_dims(channels, height, width)?;
        Ok(RealTensor {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        })
    }

    pub fn from_data(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(channels, height, width)?;
        if data.len() != channels * height * width {
            return Err(Error::shape(format!(
                "data length {} does not match {channels}*{height}*{width}",
                data.len()
            )));
        }
        Ok(RealTensor {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let hw = self.height * self.width;
        &self.data[c * hw..(c + 1) * hw]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let hw = self.height * self.width;
        &mut self.data[c * hw..(c + 1) * hw]
    }

    pub fn get(&self, c: usize, i: usize, j: usize) -> Result<f64> {
        if c >= self.channels || i >= self.height || j >= self.width {
            return Err(Error::bounds(format!(
                "index ({c}, {i}, {j}) outside shape {:?}",
                self.shape()
            )));
        }
        Ok(self.data[(c * self.height + i) * self.width + j])
    }

    pub fn set(&mut self, c: usize, i: usize, j: usize, v: f64) -> Result<()> {
        if c >= self.channels || i >= self.height || j >= self.width {
            return Err(Error::bounds(format!(
                "index ({c}, {i}, {j}) outside shape {:?}",
                self.shape()
            )));
        }
        self.data[(c * self.height + i) * self.width + j] = v;
        Ok(())
    }

    fn check_same_shape(&self, other: &RealTensor) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(format!(
                "shape mismatch: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &RealTensor) -> Result<RealTensor> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> RealTensor {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= s;
        }
        out
    }

    pub fn hadamard(&self, other: &RealTensor) -> Result<RealTensor> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a *= b;
        }
        Ok(out)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RealTensor {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v = f(*v);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_qtensor(c: usize, h: usize, w: usize, seed: u64) -> QTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..4 * c * h * w)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        QTensor::from_data(c, h, w, data).unwrap()
    }

    #[test]
    fn zeros_shapes() {
        let t = QTensor::zeros(1, 2, 2).unwrap();
        assert_eq!(t.data().len(), 16);
        assert!(t.data().iter().all(|&v| v == 0.0));
        assert_eq!(t.get(0, 0, 0).unwrap(), Quaternion::ZERO);

        let t = QTensor::zeros(8, 256, 384).unwrap();
        assert_eq!(t.shape(), (8, 256, 384));
        assert_eq!(t.data().iter().sum::<f64>(), 0.0);

        assert!(matches!(QTensor::zeros(0, 2, 2), Err(Error::Shape(_))));
        assert!(matches!(RealTensor::zeros(3, 0, 2), Err(Error::Shape(_))));
    }

    #[test]
    fn get_set_roundtrip() {
        let mut t = QTensor::zeros(2, 3, 4).unwrap();
        let q = Quaternion::new(1.0, 2.0, 3.0, 4.0);
        t.set(0, 0, 0, q).unwrap();
        assert_eq!(t.get(0, 0, 0).unwrap(), q);
        assert_eq!(t.get(1, 2, 3).unwrap(), Quaternion::ZERO);
        // one past the end on each axis
        assert!(matches!(t.set(2, 0, 0, q), Err(Error::Bounds(_))));
        assert!(matches!(t.get(0, 3, 0), Err(Error::Bounds(_))));
        assert!(matches!(t.get(0, 0, 4), Err(Error::Bounds(_))));
    }

    #[test]
    fn real_blocks_single_channel_order() {
        let mut t = QTensor::zeros(1, 1, 2).unwrap();
        t.set(0, 0, 0, Quaternion::new(1.0, 2.0, 3.0, 4.0)).unwrap();
        t.set(0, 0, 1, Quaternion::new(5.0, 6.0, 7.0, 8.0)).unwrap();
        let blocks = t.to_real_blocks();
        assert_eq!(blocks.shape(), (4, 1, 2));
        assert_eq!(blocks.channel(0), &[1.0, 5.0]); // r plane
        assert_eq!(blocks.channel(1), &[2.0, 6.0]); // x plane
        assert_eq!(blocks.channel(2), &[3.0, 7.0]); // y plane
        assert_eq!(blocks.channel(3), &[4.0, 8.0]); // z plane
    }

    #[test]
    fn real_blocks_roundtrip_bitwise() {
        let t = random_qtensor(3, 5, 4, 21);
        let back = QTensor::from_real_blocks(&t.to_real_blocks()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn from_real_blocks_rejects_bad_channel_count() {
        let r = RealTensor::zeros(3, 2, 2).unwrap();
        assert!(matches!(
            QTensor::from_real_blocks(&r),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn elementwise_ops() {
        let t = random_qtensor(2, 3, 3, 5);
        let z = QTensor::zeros(2, 3, 3).unwrap();
        assert_eq!(t.add(&z).unwrap(), t);
        assert_eq!(t.scale(0.0), z);
        let mut spiked = t.clone();
        spiked.data_mut()[7] = 5.0;
        let clamped = spiked.map(|v| v.clamp(-1.0, 1.0));
        assert_eq!(clamped.data()[7], 1.0);

        let other = random_qtensor(2, 3, 4, 6);
        assert!(matches!(t.add(&other), Err(Error::Shape(_))));
        assert!(matches!(t.hadamard(&other), Err(Error::Shape(_))));
    }
}
