/** Centered moving average with edge truncation: a point keeps its raw value
 *  when the full window does not fit (so the first/last (w-1)/2 points are
 *  untouched).  window must be an odd integer >= 1; window=1 is the identity.
 */
export function movingAverage(values: number[], window: number): number[] {
  if (!Number.isInteger(window) || window < 1 || window % 2 === 0) {
    throw new Error(`smoothing window must be an odd integer >= 1, got ${window}`);
  }
  if (window === 1) return values.slice();
  const half = (window - 1) / 2;
  return values.map((v, i) => {
    if (i < half || i >= values.length - half) return v;
    let sum = 0;
    for (let j = i - half; j <= i + half; j++) sum += values[j];
    return sum / window;
  });
}
