use std::sync::Arc;

use ndarray::{s, Array2, ArrayView1, ArrayView2};

use super::{TraceError, TraceFrame};

/// Sliding windows over a shared frame matrix.
///
/// Window `i` covers rows `starts[i] .. starts[i] + window_len`; its target is
/// the target column over the `horizon` rows that follow.
#[derive(Debug, Clone)]
pub struct WindowedDataset {
    data: Arc<Array2<f64>>,
    target_col: usize,
    window_len: usize,
    horizon: usize,
    starts: Vec<usize>,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_features(&self) -> usize {
        self.data.ncols()
    }

    pub fn target_col(&self) -> usize {
        self.target_col
    }

    /// Row offset of each window in the source frame.
    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn input(&self, i: usize) -> ArrayView2<'_, f64> {
        let a = self.starts[i];
        self.data.slice(s![a..a + self.window_len, ..])
    }

    pub fn target(&self, i: usize) -> ArrayView1<'_, f64> {
        let a = self.starts[i] + self.window_len;
        self.data.slice(s![a..a + self.horizon, self.target_col])
    }

    /// Subset by window index, keeping order.
    pub fn select(&self, indices: &[usize]) -> WindowedDataset {
        WindowedDataset {
            starts: indices.iter().map(|&i| self.starts[i]).collect(),
            ..self.clone_meta()
        }
    }

    fn clone_meta(&self) -> WindowedDataset {
        WindowedDataset {
            data: Arc::clone(&self.data),
            target_col: self.target_col,
            window_len: self.window_len,
            horizon: self.horizon,
            starts: Vec::new(),
        }
    }
}

pub fn make_windows(
    frame: &TraceFrame,
    window_len: usize,
    horizon: usize,
    target_metric: &str,
) -> Result<WindowedDataset, TraceError> {
    if window_len == 0 || horizon == 0 {
        return Err(TraceError::InvalidArgument(
            "window_len and horizon must be > 0".into(),
        ));
    }
    let target_col = frame.column_index(target_metric)?;
    let required = window_len + horizon;
    let n = frame.len();
    if n < required {
        return Err(TraceError::TooShort { required, actual: n });
    }
    Ok(WindowedDataset {
        data: Arc::new(frame.data().clone()),
        target_col,
        window_len,
        horizon,
        starts: (0..=n - required).collect(),
    })
}

/// Chronological split: the first `floor(ratio * len)` windows train.
pub fn split_train_test(
    dataset: &WindowedDataset,
    ratio: f64,
) -> Result<(WindowedDataset, WindowedDataset), TraceError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(TraceError::InvalidArgument(format!(
            "ratio {ratio} outside (0, 1)"
        )));
    }
    let count = dataset.len();
    let cut = (ratio * count as f64).floor() as usize;
    if cut == 0 {
        return Err(TraceError::EmptySplit {
            side: "train",
            count,
            ratio,
        });
    }
    if cut == count {
        return Err(TraceError::EmptySplit {
            side: "test",
            count,
            ratio,
        });
    }
    let train = WindowedDataset {
        starts: dataset.starts[..cut].to_vec(),
        ..dataset.clone_meta()
    };
    let test = WindowedDataset {
        starts: dataset.starts[cut..].to_vec(),
        ..dataset.clone_meta()
    };
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::N_FEATURES;

    fn ramp(n: usize) -> TraceFrame {
        let mut data = Array2::zeros((n, N_FEATURES));
        for k in 0..n {
            for j in 0..N_FEATURES {
                data[[k, j]] = (k * 100 + j) as f64;
            }
        }
        TraceFrame::canonical(0, 300, data).unwrap()
    }

    #[test]
    fn window_counts() {
        assert_eq!(make_windows(&ramp(85), 72, 12, "cpu_util").unwrap().len(), 2);
        // Enumerate every start whose window and horizon fit.
        let n = 100;
        let enumerated = (0..n).filter(|s| s + 72 + 12 <= n).count();
        let d = make_windows(&ramp(n), 72, 12, "cpu_util").unwrap();
        assert_eq!(d.len(), enumerated);
        assert_eq!(d.len(), 17);
    }

    #[test]
    fn first_window_is_contiguous_and_aligned() {
        let d = make_windows(&ramp(100), 72, 12, "mem_util").unwrap();
        let x = d.input(0);
        assert_eq!(x.nrows(), 72);
        assert_eq!(x[[0, 0]], 0.0);
        assert_eq!(x[[71, 0]], 7100.0);
        let y = d.target(0);
        let expected: Vec<f64> = (72..84).map(|k| (k * 100 + 1) as f64).collect();
        assert_eq!(y.to_vec(), expected);
    }

    #[test]
    fn too_short_reports_minimum() {
        match make_windows(&ramp(50), 72, 12, "cpu_util") {
            Err(TraceError::TooShort { required, actual }) => {
                assert_eq!((required, actual), (84, 50));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn chronological_split() {
        let d = make_windows(&ramp(30), 12, 9, "cpu_util").unwrap();
        assert_eq!(d.len(), 10);
        let (tr, te) = split_train_test(&d, 0.8).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        assert!(tr.starts().last() < te.starts().first());
        let (tr, te) = split_train_test(&d, 0.5).unwrap();
        assert_eq!((tr.len(), te.len()), (5, 5));
        assert!(split_train_test(&d, 0.05).is_err());
        assert!(split_train_test(&d, 1.0).is_err());
        let one = make_windows(&ramp(21), 12, 9, "cpu_util").unwrap();
        assert!(matches!(
            split_train_test(&one, 0.5),
            Err(TraceError::EmptySplit { side: "train", .. })
        ));
    }
}
