/** Tiny entropy sparkline drawn onto its own canvas. */

export function drawSparkline(
  ctx: CanvasRenderingContext2D,
  values: number[],
  widthPx: number,
  heightPx: number,
): void {
  ctx.clearRect(0, 0, widthPx, heightPx);
  if (values.length === 0) return;

  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1; // flat trace renders as a midline
  const pad = 3;

  const x = (i: number) =>
    values.length === 1
      ? widthPx / 2
      : pad + (i / (values.length - 1)) * (widthPx - 2 * pad);
  const y = (v: number) =>
    heightPx - pad - ((v - lo) / span) * (heightPx - 2 * pad);

  ctx.beginPath();
  values.forEach((v, i) => {
    if (i === 0) ctx.moveTo(x(0), y(v));
    else ctx.lineTo(x(i), y(v));
  });
  ctx.strokeStyle = "#4fc3f7";
  ctx.stroke();

  const last = values[values.length - 1];
  ctx.beginPath();
  ctx.arc(x(values.length - 1), y(last), 2.5, 0, 2 * Math.PI);
  ctx.fillStyle = "#4fc3f7";
  ctx.fill();

  ctx.fillStyle = "#c7d0e0";
  ctx.font = "11px sans-serif";
  ctx.textAlign = "left";
  ctx.textBaseline = "top";
  ctx.fillText(`H = ${last.toFixed(3)} bits`, pad, pad);
}
