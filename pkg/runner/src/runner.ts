import { spawn } from "node:child_process";
import * as fs from "node:fs";
import * as path from "node:path";

export interface RunRequest {
  scriptPath: string;
  workdir: string;
  timeoutS: number;
  envOverrides?: Record<string, string>;
  pythonBin?: string;
}

export interface RunResult {
  exit_code: number;
  timed_out: boolean;
  stdout: string;
  stderr: string;
  duration_ms: number;
  artifacts: string[];
}

export const STREAM_CAP_BYTES = 1024 * 1024;
export const MAX_TIMEOUT_S = 600;

/** Rolling buffer that keeps only the final STREAM_CAP_BYTES of a stream. */
class TailBuffer {
  private chunks: Buffer[] = [];
  private size = 0;

  push(chunk: Buffer): void {
    this.chunks.push(chunk);
    this.size += chunk.length;
    while (this.size > STREAM_CAP_BYTES && this.chunks.length > 0) {
      const head = this.chunks[0];
      const excess = this.size - STREAM_CAP_BYTES;
      if (head.length <= excess) {
        this.chunks.shift();
        this.size -= head.length;
      } else {
        this.chunks[0] = head.subarray(excess);
        this.size -= excess;
      }
    }
  }

  toString(): string {
    return Buffer.concat(this.chunks).toString("utf-8");
  }
}

/** Relative paths of every regular file under root (recursive). */
function listFiles(root: string): Set<string> {
  const seen = new Set<string>();
  const walk = (dir: string): void => {
    let entries: fs.Dirent[];
    try {
      entries = fs.readdirSync(dir, { withFileTypes: true });
    } catch {
      return; // a directory vanished mid-walk; skip it
    }
    for (const entry of entries) {
      const full = path.join(dir, entry.name);
      if (entry.isDirectory()) {
        walk(full);
      } else if (entry.isFile()) {
        seen.add(path.relative(root, full));
      }
    }
  };
  walk(root);
  return seen;
}

function failure(message: string): RunResult {
  return {
    exit_code: -1,
    timed_out: false,
    stdout: "",
    stderr: message,
    duration_ms: 0,
    artifacts: [],
  };
}

export function runScript(req: RunRequest): Promise<RunResult> {
  if (!Number.isFinite(req.timeoutS) || req.timeoutS <= 0 || req.timeoutS > MAX_TIMEOUT_S) {
    return Promise.resolve(
      failure(`invalid timeout: ${req.timeoutS} (must be 1..${MAX_TIMEOUT_S} s)`)
    );
  }
  if (!fs.existsSync(req.scriptPath) || !fs.statSync(req.scriptPath).isFile()) {
    return Promise.resolve(failure(`script missing: ${req.scriptPath}`));
  }
  try {
    if (!fs.statSync(req.workdir).isDirectory()) {
      return Promise.resolve(failure(`workdir is not a directory: ${req.workdir}`));
    }
    fs.accessSync(req.workdir, fs.constants.W_OK);
  } catch {
    return Promise.resolve(failure(`workdir unwritable: ${req.workdir}`));
  }

  const before = listFiles(req.workdir);
  const scriptAbs = path.resolve(req.scriptPath);

  // headless, non-interactive plotting for the child
  const env: NodeJS.ProcessEnv = {
    ...process.env,
    MPLBACKEND: "Agg",
    PYTHONUNBUFFERED: "1",
    ...(req.envOverrides ?? {}),
  };
  delete env.DISPLAY;

  return new Promise<RunResult>((resolve) => {
    const started = Date.now();
    const stdout = new TailBuffer();
    const stderr = new TailBuffer();
    let timedOut = false;
    let settled = false;

    const child = spawn(req.pythonBin ?? "python3", [scriptAbs], {
      cwd: req.workdir,
      env,
      stdio: ["ignore", "pipe", "pipe"],
    });

    const timer = setTimeout(() => {
      timedOut = true;
      child.kill("SIGKILL");
    }, req.timeoutS * 1000);

    child.stdout.on("data", (chunk: Buffer) => stdout.push(chunk));
    child.stderr.on("data", (chunk: Buffer) => stderr.push(chunk));

    const finish = (exitCode: number, extraStderr = "") => {
      if (settled) return;
      settled = true;
      clearTimeout(timer);
      const after = listFiles(req.workdir);
      const artifacts = [...after].filter((f) => !before.has(f)).sort();
      if (extraStderr) stderr.push(Buffer.from(extraStderr));
      resolve({
        exit_code: exitCode,
        timed_out: timedOut,
        stdout: stdout.toString(),
        stderr: stderr.toString(),
        duration_ms: Date.now() - started,
        artifacts,
      });
    };

    child.on("error", (err) => finish(-1, `failed to launch interpreter: ${err.message}\n`));
    child.on("close", (code, signal) => {
      finish(code ?? (signal === "SIGKILL" && timedOut ? -9 : -1));
    });
  });
}
