class Point {
  x: number;
  label: string;

  scale(k: number): number {
    return this.x * k;
  }
}

function shift(p: Point, dx: number): Point {
  let stepX: number = dx;
  p.x = p.x + stepX;
  if (dx) {
    p.label = "moved";
  }
  return p;
}
