#!/usr/bin/env node
// CLI contract: `runner --script <path> --workdir <path> --timeout <s>`.
// Exactly one JSON object goes to stdout, and the process exits 0 whenever
// that object was produced -- including for bad arguments, missing scripts,
// crashes, and timeouts.

import { runScript, RunRequest } from "./runner";

interface ParsedArgs {
  request?: RunRequest;
  error?: string;
}

function parseArgs(argv: string[]): ParsedArgs {
  let script: string | undefined;
  let workdir: string | undefined;
  let timeout = 120;
  const envOverrides: Record<string, string> = {};

  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      i++;
      if (i >= argv.length) throw new Error(`missing value for ${arg}`);
      return argv[i];
    };
    try {
      switch (arg) {
        case "--script":
          script = next();
          break;
        case "--workdir":
          workdir = next();
          break;
        case "--timeout":
          timeout = Number(next());
          break;
        case "--env": {
          const pair = next();
          const eq = pair.indexOf("=");
          if (eq < 1) return { error: `--env expects KEY=VALUE, got: ${pair}` };
          envOverrides[pair.slice(0, eq)] = pair.slice(eq + 1);
          break;
        }
        default:
          return { error: `unknown argument: ${arg}` };
      }
    } catch (err) {
      return { error: (err as Error).message };
    }
  }
  if (!script) return { error: "--script is required" };
  if (!workdir) return { error: "--workdir is required" };
  return {
    request: { scriptPath: script, workdir, timeoutS: timeout, envOverrides },
  };
}

async function main(): Promise<void> {
  const parsed = parseArgs(process.argv.slice(2));
  if (parsed.error || !parsed.request) {
    process.stdout.write(
      JSON.stringify({
        exit_code: -1,
        timed_out: false,
        stdout: "",
        stderr: `usage error: ${parsed.error ?? "bad arguments"}`,
        duration_ms: 0,
        artifacts: [],
      }) + "\n"
    );
    process.exit(0);
  }
  const result = await runScript(parsed.request);
  process.stdout.write(JSON.stringify(result) + "\n");
  process.exit(0);
}

main();
