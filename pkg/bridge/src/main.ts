/**
 * Entry point. JSON-lines over stdio by default; TCP with --tcp PORT.
 *
 *   node dist/main.js --model mlp
 *   node dist/main.js --model tabular:/path/to/model.json --tcp 7070
 *
 * Each connection is served single-threaded: requests are answered in
 * arrival order, one in flight at a time. Engine-side parallelism comes
 * from opening more connections.
 */

import { createInterface } from 'node:readline';
import { createServer } from 'node:net';

import { resolveModel, respond, runStartupProbes } from './server.js';

function parseArgs(argv: string[]): { model: string; tcp: number | null } {
  let model = 'mlp';
  let tcp: number | null = null;
  for (let i = 0; i < argv.length; i += 1) {
    if (argv[i] === '--model') model = argv[++i];
    else if (argv[i] === '--tcp') tcp = Number(argv[++i]);
    else throw new Error(`unknown argument '${argv[i]}'`);
  }
  return { model, tcp };
}

async function main(): Promise<number> {
  const { model: spec, tcp } = parseArgs(process.argv.slice(2));
  const model = resolveModel(spec);
  const probes = runStartupProbes(model);
  if (!probes.deterministic) {
    process.stderr.write(
      `fatal: scoring is not deterministic (max delta ${probes.maxDelta})\n`,
    );
    return 1;
  }
  for (const m of probes.tokenizerMismatches) {
    process.stderr.write(
      `tokenizer round-trip mismatch at offset ${m.offset} for ${JSON.stringify(m.text)}\n`,
    );
  }
  process.stderr.write(`serving ${model.modelId} (vocab ${model.tokens.length})\n`);

  if (tcp !== null) {
    const server = createServer((socket) => {
      const rl = createInterface({ input: socket });
      rl.on('line', (line) => {
        if (line.trim().length === 0) return;
        socket.write(respond(model, line) + '\n');
      });
    });
    await new Promise<void>((resolve) => server.listen(tcp, () => resolve()));
    process.stderr.write(`listening on tcp port ${tcp}\n`);
    await new Promise(() => undefined); // serve until killed
    return 0;
  }

  const rl = createInterface({ input: process.stdin });
  for await (const line of rl) {
    if (line.trim().length === 0) continue;
    process.stdout.write(respond(model, line) + '\n');
  }
  return 0;
}

main().then(
  (code) => process.exit(code),
  (err) => {
    process.stderr.write(`fatal: ${err instanceof Error ? err.message : err}\n`);
    process.exit(1);
  },
);
