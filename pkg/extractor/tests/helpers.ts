import { ChildProcess, spawn, spawnSync } from "child_process";
import * as fs from "fs";
import * as path from "path";
import * as readline from "readline";
import { RgbImage, encodePng } from "../src/image";

export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Smooth diagonal gradient family: low frequency, warm palette. */
export function gradientImage(seed: number, width = 48, height = 40): RgbImage {
  const rand = mulberry32(seed);
  const r0 = 0.55 + 0.3 * rand();
  const g0 = 0.25 + 0.3 * rand();
  const slope = 0.3 + 0.4 * rand();
  const pixels = new Float32Array(width * height * 3);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const t = (x / width + y / height) / 2;
      const i = (y * width + x) * 3;
      pixels[i] = r0 * (1 - slope * t);
      pixels[i + 1] = g0 * (1 - slope * t) + 0.1 * t;
      pixels[i + 2] = 0.15 + 0.2 * t;
    }
  }
  return { width, height, pixels };
}

/** Visually distinct family: high-frequency checkerboard noise, cold palette. */
export function checkerNoiseImage(seed: number, width = 48, height = 40): RgbImage {
  const rand = mulberry32(seed ^ 0x9e3779b9);
  const cell = 2 + Math.floor(rand() * 3);
  const pixels = new Float32Array(width * height * 3);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const on = (Math.floor(x / cell) + Math.floor(y / cell)) % 2 === 0;
      const n = rand() * 0.3;
      const i = (y * width + x) * 3;
      pixels[i] = on ? 0.1 + n : 0.0;
      pixels[i + 1] = on ? 0.2 + n : 0.4 - n;
      pixels[i + 2] = on ? 0.9 - n : 0.5 + n;
    }
  }
  return { width, height, pixels };
}

export function writeImageDir(
  dir: string,
  count: number,
  maker: (seed: number) => RgbImage,
  offset = 0
): void {
  fs.mkdirSync(dir, { recursive: true });
  for (let i = 0; i < count; i++) {
    encodePng(path.join(dir, `img_${String(i).padStart(5, "0")}.png`), maker(offset + i));
  }
}

export function runCli(command: string, args: string[], timeoutMs = 600_000) {
  const proc = spawnSync(command, args, { encoding: "utf-8", timeout: timeoutMs });
  return { status: proc.status, stdout: proc.stdout ?? "", stderr: proc.stderr ?? "" };
}

export const SERVE_JS = path.join(__dirname, "..", "dist", "serve.js");
export const EXTRACT_JS = path.join(__dirname, "..", "dist", "extract.js");

/** Minimal protocol client for driving the peer from tests. */
export class PeerClient {
  private proc: ChildProcess;
  private lines: string[] = [];
  private waiters: Array<(line: string) => void> = [];
  private nextId = 0;

  constructor(args: string[]) {
    this.proc = spawn("node", [SERVE_JS, ...args], { stdio: ["pipe", "pipe", "inherit"] });
    const rl = readline.createInterface({ input: this.proc.stdout! });
    rl.on("line", (line) => {
      const waiter = this.waiters.shift();
      if (waiter) waiter(line);
      else this.lines.push(line);
    });
  }

  recv(timeoutMs = 120_000): Promise<any> {
    const buffered = this.lines.shift();
    if (buffered !== undefined) return Promise.resolve(JSON.parse(buffered));
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error("peer timeout")), timeoutMs);
      this.waiters.push((line) => {
        clearTimeout(timer);
        resolve(JSON.parse(line));
      });
    });
  }

  sendRaw(line: string): void {
    this.proc.stdin!.write(line);
  }

  send(msg: Record<string, unknown>): void {
    this.sendRaw(JSON.stringify(msg) + "\n");
  }

  async render(samples: number[][]): Promise<any> {
    const id = this.nextId++;
    this.send({ type: "render", id, samples });
    return this.recv();
  }

  async shutdown(): Promise<number | null> {
    this.send({ type: "shutdown" });
    return new Promise((resolve) => this.proc.on("exit", (code) => resolve(code)));
  }

  kill(): void {
    this.proc.kill();
  }
}
