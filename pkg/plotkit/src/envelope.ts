/**
 * Rolling max-|y| envelope over a centered time window.
 *
 * envelope[i] = max |y[j]| over all samples with |t[j] - t[i]| <= window/2.
 * The window is in time units; by construction envelope[i] >= |y[i]|.
 */
export function rollingMaxAbs(t: Float64Array, y: Float64Array, window: number): Float64Array {
  const n = t.length;
  const out = new Float64Array(n);
  const half = Math.max(window, 0) / 2;
  let lo = 0;
  let hi = 0;
  // two-pointer sweep; t is monotone in telemetry files
  for (let i = 0; i < n; i += 1) {
    while (lo < n && t[lo] < t[i] - half) lo += 1;
    if (hi < i + 1) hi = i + 1;
    while (hi < n && t[hi] <= t[i] + half) hi += 1;
    let m = 0;
    for (let j = lo; j < hi; j += 1) {
      const a = Math.abs(y[j]);
      if (a > m) m = a;
    }
    out[i] = m;
  }
  return out;
}

/** Median spacing of a (monotone) time axis; 0 for fewer than 2 samples. */
export function medianSpacing(t: Float64Array): number {
  if (t.length < 2) return 0;
  const gaps = new Float64Array(t.length - 1);
  for (let i = 1; i < t.length; i += 1) gaps[i - 1] = t[i] - t[i - 1];
  gaps.sort();
  return gaps[Math.floor(gaps.length / 2)];
}
