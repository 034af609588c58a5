use super::{LinalgError, Matrix};

/// Convolution kernel with axes `(width, height, in_channels, out_channels)`.
///
/// Storage is row-major over that axis order, so the output channel varies
/// fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTensor {
    width: usize,
    height: usize,
    in_channels: usize,
    out_channels: usize,
    data: Vec<f64>,
}

impl ConvTensor {
    pub fn new(
        width: usize,
        height: usize,
        in_channels: usize,
        out_channels: usize,
        data: Vec<f64>,
    ) -> Result<Self, LinalgError> {
        let expected = width * height * in_channels * out_channels;
        if expected == 0 {
            return Err(LinalgError::EmptyShape {
                rows: width * height * in_channels,
                cols: out_channels,
            });
        }
        if data.len() != expected {
            return Err(LinalgError::DataLength {
                expected,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            in_channels,
            out_channels,
            data,
        })
    }

    /// Inverse of [`reshape_conv`]: reads a `(width·height·in_channels) × out_channels`
    /// matrix back into kernel layout.
    pub fn from_matrix(width: usize, height: usize, in_channels: usize, m: &Matrix) -> Result<Self, LinalgError> {
        if m.rows() != width * height * in_channels {
            return Err(LinalgError::ShapeMismatch {
                op: "conv_from_matrix",
                left: (width * height * in_channels, m.cols()),
                right: m.shape(),
            });
        }
        Self::new(width, height, in_channels, m.cols(), m.as_slice().to_vec())
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.width, self.height, self.in_channels, self.out_channels)
    }

    pub fn get(&self, s: usize, h: usize, c: usize, m: usize) -> f64 {
        self.data[self.offset(s, h, c, m)]
    }

    fn offset(&self, s: usize, h: usize, c: usize, m: usize) -> usize {
        ((s * self.height + h) * self.in_channels + c) * self.out_channels + m
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Flattens a kernel into a `(S·H·C) × M` matrix whose columns are filters.
///
/// Row index is `(s·H + h)·C + c`; because the kernel stores the output
/// channel fastest this is a reinterpretation of the buffer.
pub fn reshape_conv(c: &ConvTensor) -> Matrix {
    let rows = c.width * c.height * c.in_channels;
    Matrix::from_parts(rows, c.out_channels, c.data.clone())
}
