use crate::ndcore::Matrix;
use crate::{Error, Result};

/// One `W x C` slice of a series.
#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    pub start: usize,
    pub values: Matrix,
    pub labels: Option<Vec<u8>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowSet {
    pub window: usize,
    pub stride: usize,
    pub total_len: usize,
    pub windows: Vec<Window>,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn starts(&self) -> Vec<usize> {
        self.windows.iter().map(|w| w.start).collect()
    }
}

/// Window starts `0, stride, 2*stride, ...`; when the last regular window
/// stops short of `T`, a tail window anchored at `T - W` is appended.
pub fn window_starts(total: usize, window: usize, stride: usize) -> Result<Vec<usize>> {
    if window == 0 || stride == 0 || stride > window {
        return Err(Error::config(format!(
            "need 1 <= stride <= window, got window={window} stride={stride}"
        )));
    }
    if window > total {
        return Err(Error::config(format!(
            "window {window} longer than series length {total}"
        )));
    }
    let mut starts: Vec<usize> = (0..=total - window).step_by(stride).collect();
    if starts.last().is_none_or(|&s| s + window < total) {
        starts.push(total - window);
    }
    Ok(starts)
}

pub fn make_windows(
    values: &Matrix,
    labels: Option<&[u8]>,
    window: usize,
    stride: usize,
) -> Result<WindowSet> {
    let total = values.rows();
    let windows = window_starts(total, window, stride)?
        .into_iter()
        .map(|start| Window {
            start,
            values: values.slice_rows(start, start + window),
            labels: labels.map(|y| y[start..start + window].to_vec()),
        })
        .collect();
    Ok(WindowSet {
        window,
        stride,
        total_len: total,
        windows,
    })
}

/// Averages per-window score rows back onto the timeline.
pub fn reassemble(ws: &WindowSet, scores: &[Vec<f64>]) -> Result<Vec<f64>> {
    if scores.len() != ws.windows.len() {
        return Err(Error::config(format!(
            "{} score rows for {} windows",
            scores.len(),
            ws.windows.len()
        )));
    }
    let mut sum = vec![0.0; ws.total_len];
    let mut count = vec![0usize; ws.total_len];
    for (w, row) in ws.windows.iter().zip(scores) {
        if row.len() != ws.window {
            return Err(Error::config(format!(
                "score row of length {} for window {}",
                row.len(),
                ws.window
            )));
        }
        for (k, s) in row.iter().enumerate() {
            sum[w.start + k] += s;
            count[w.start + k] += 1;
        }
    }
    Ok(sum
        .into_iter()
        .zip(count)
        .map(|(s, n)| {
            debug_assert!(n > 0);
            s / n as f64
        })
        .collect())
}
