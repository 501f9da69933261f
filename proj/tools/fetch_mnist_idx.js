#!/usr/bin/env node
// Materializes MNIST digit data as IDX files under data/.
//
// Usage:  npm install mnist && node tools/fetch_mnist_idx.js [outdir]
//
// The npm "mnist" package bundles 10,000 MNIST digits as grayscale values
// in [0,1] (about 1,000 per class). This script converts them back to bytes
// (round(v * 255)), deterministically shuffles with a fixed LCG seed, and
// writes a disjoint 8,000 / 2,000 train/test pool split in the standard IDX
// format (big-endian magic 0x803 for images, 0x801 for labels).

const fs = require('fs');
const path = require('path');

const outDir = process.argv[2] || path.join(__dirname, '..', 'data');

let digitsDir;
for (const candidate of [
  path.join(__dirname, '..', 'node_modules', 'mnist', 'src', 'digits'),
  path.join(process.cwd(), 'node_modules', 'mnist', 'src', 'digits'),
]) {
  if (fs.existsSync(candidate)) { digitsDir = candidate; break; }
}
if (!digitsDir) {
  console.error('node_modules/mnist not found. Run: npm install mnist');
  process.exit(1);
}

const SIZE = 28, DIM = SIZE * SIZE;
const images = [];
const labels = [];
for (let d = 0; d <= 9; d++) {
  const flat = JSON.parse(fs.readFileSync(path.join(digitsDir, `${d}.json`))).data;
  if (flat.length % DIM !== 0) throw new Error(`digit ${d}: length not a multiple of ${DIM}`);
  for (let i = 0; i < flat.length; i += DIM) {
    const img = Buffer.alloc(DIM);
    for (let j = 0; j < DIM; j++) {
      img[j] = Math.max(0, Math.min(255, Math.round(flat[i + j] * 255)));
    }
    images.push(img);
    labels.push(d);
  }
}
console.log(`loaded ${images.length} images`);

// Deterministic shuffle (Park-Miller LCG, seed fixed) so reruns produce
// byte-identical files.
let state = 20240901;
function nextRand() {
  state = (state * 48271) % 2147483647;
  return state;
}
for (let i = images.length - 1; i > 0; i--) {
  const j = nextRand() % (i + 1);
  [images[i], images[j]] = [images[j], images[i]];
  [labels[i], labels[j]] = [labels[j], labels[i]];
}

function u32be(v) {
  const b = Buffer.alloc(4);
  b.writeUInt32BE(v >>> 0, 0);
  return b;
}

function writeIdx(prefix, imgs, labs) {
  const imgHeader = Buffer.concat([u32be(0x803), u32be(imgs.length), u32be(SIZE), u32be(SIZE)]);
  fs.writeFileSync(path.join(outDir, `${prefix}-images-idx3-ubyte`), Buffer.concat([imgHeader, ...imgs]));
  const labHeader = Buffer.concat([u32be(0x801), u32be(labs.length)]);
  fs.writeFileSync(path.join(outDir, `${prefix}-labels-idx1-ubyte`),
                   Buffer.concat([labHeader, Buffer.from(labs)]));
  console.log(`wrote ${prefix}: ${imgs.length} samples`);
}

fs.mkdirSync(outDir, { recursive: true });
const N_TEST = 2000;
writeIdx('train', images.slice(0, images.length - N_TEST), labels.slice(0, labels.length - N_TEST));
writeIdx('t10k', images.slice(images.length - N_TEST), labels.slice(labels.length - N_TEST));
