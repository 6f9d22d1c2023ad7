/**
 * Node bridge between the browser and the cloud agent's TCP gateway.
 *
 * Browsers cannot open raw TCP sockets, so this process keeps one upstream
 * gateway connection (reconnecting with backoff) and exposes:
 *
 *   GET  /api/stream   -> chunked NDJSON: every record the gateway sends
 *   POST /api/command  -> body is one command line; replies with the ack JSON
 *   GET  /...          -> static cockpit files from public/ and dist/
 *
 * Acks and status replies arrive on the same upstream socket interleaved
 * with telemetry; they are routed FIFO to pending command requests (the
 * gateway answers a client's lines in order).
 */

import * as fs from "node:fs";
import * as http from "node:http";
import * as net from "node:net";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

export interface BridgeOptions {
  gatewayHost: string;
  gatewayPort: number;
  listenPort: number;
  staticDirs: string[];
}

type PendingReply = { resolve: (line: string) => void; reject: (err: Error) => void };

export class Bridge {
  private upstream: net.Socket | null = null;
  private streamClients = new Set<http.ServerResponse>();
  private pendingReplies: PendingReply[] = [];
  private server: http.Server;
  private stopped = false;
  private backoffMs = 250;

  constructor(private opts: BridgeOptions) {
    this.server = http.createServer((req, res) => this.route(req, res));
  }

  start(): Promise<number> {
    this.connectUpstream();
    return new Promise((resolve) => {
      this.server.listen(this.opts.listenPort, "127.0.0.1", () => {
        const addr = this.server.address() as net.AddressInfo;
        resolve(addr.port);
      });
    });
  }

  stop(): void {
    this.stopped = true;
    this.upstream?.destroy();
    for (const res of this.streamClients) res.destroy();
    this.streamClients.clear();
    this.server.close();
  }

  private connectUpstream(): void {
    if (this.stopped) return;
    const sock = net.createConnection(this.opts.gatewayPort, this.opts.gatewayHost);
    let buffer = "";
    sock.on("connect", () => {
      this.backoffMs = 250;
    });
    sock.on("data", (chunk) => {
      buffer += chunk.toString("utf-8");
      let idx;
      while ((idx = buffer.indexOf("\n")) >= 0) {
        const line = buffer.slice(0, idx);
        buffer = buffer.slice(idx + 1);
        this.dispatch(line);
      }
    });
    const retry = () => {
      this.upstream = null;
      this.failPending(new Error("gateway connection lost"));
      if (!this.stopped) {
        setTimeout(() => this.connectUpstream(), this.backoffMs);
        this.backoffMs = Math.min(this.backoffMs * 2, 5000);
      }
    };
    sock.on("error", () => sock.destroy());
    sock.on("close", retry);
    this.upstream = sock;
  }

  private dispatch(line: string): void {
    if (!line.trim()) return;
    let type: string | undefined;
    try {
      type = (JSON.parse(line) as { type?: string }).type;
    } catch {
      return;
    }
    if (type === "ack" || type === "status") {
      this.pendingReplies.shift()?.resolve(line);
      return;
    }
    for (const res of this.streamClients) {
      res.write(line + "\n");
    }
  }

  private failPending(err: Error): void {
    for (const pending of this.pendingReplies.splice(0)) pending.reject(err);
  }

  private route(req: http.IncomingMessage, res: http.ServerResponse): void {
    const url = req.url ?? "/";
    if (req.method === "GET" && url === "/api/stream") {
      res.writeHead(200, {
        "content-type": "application/x-ndjson",
        "cache-control": "no-store",
        "x-accel-buffering": "no",
      });
      res.flushHeaders();
      this.streamClients.add(res);
      req.on("close", () => this.streamClients.delete(res));
      return;
    }
    if (req.method === "POST" && url === "/api/command") {
      let body = "";
      req.on("data", (c) => (body += c));
      req.on("end", () => void this.handleCommand(body.trim(), res));
      return;
    }
    if (req.method === "GET") {
      this.serveStatic(url === "/" ? "/index.html" : url, res);
      return;
    }
    res.writeHead(405).end();
  }

  private async handleCommand(line: string, res: http.ServerResponse): Promise<void> {
    if (!line || line.includes("\n")) {
      res.writeHead(400, { "content-type": "application/json" });
      res.end(JSON.stringify({ type: "ack", v: 1, ok: false, error: "need one command line" }));
      return;
    }
    const upstream = this.upstream;
    if (!upstream || upstream.destroyed) {
      res.writeHead(502, { "content-type": "application/json" });
      res.end(JSON.stringify({ type: "ack", v: 1, ok: false, error: "gateway unreachable" }));
      return;
    }
    try {
      const reply = await new Promise<string>((resolve, reject) => {
        this.pendingReplies.push({ resolve, reject });
        const timer = setTimeout(() => reject(new Error("gateway reply timeout")), 5000);
        this.pendingReplies[this.pendingReplies.length - 1] = {
          resolve: (l) => {
            clearTimeout(timer);
            resolve(l);
          },
          reject: (e) => {
            clearTimeout(timer);
            reject(e);
          },
        };
        upstream.write(line + "\n");
      });
      res.writeHead(200, { "content-type": "application/json" });
      res.end(reply);
    } catch (err) {
      res.writeHead(502, { "content-type": "application/json" });
      res.end(JSON.stringify({ type: "ack", v: 1, ok: false, error: String(err) }));
    }
  }

  private serveStatic(url: string, res: http.ServerResponse): void {
    const clean = path.posix.normalize(url).replace(/^(\.\.[/\\])+/, "");
    for (const dir of this.opts.staticDirs) {
      const file = path.join(dir, clean);
      if (!file.startsWith(path.resolve(dir))) continue;
      if (fs.existsSync(file) && fs.statSync(file).isFile()) {
        const ext = path.extname(file);
        const mime = ext === ".html" ? "text/html"
          : ext === ".js" ? "text/javascript"
          : ext === ".css" ? "text/css" : "application/octet-stream";
        res.writeHead(200, { "content-type": mime });
        fs.createReadStream(file).pipe(res);
        return;
      }
    }
    res.writeHead(404).end("not found");
  }
}

function parseArgs(argv: string[]): BridgeOptions {
  const opts: BridgeOptions = {
    gatewayHost: "127.0.0.1",
    gatewayPort: 47020,
    listenPort: 8080,
    staticDirs: [],
  };
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--gateway") {
      const [host, port] = (argv[++i] ?? "").split(":");
      if (host) opts.gatewayHost = host;
      if (port) opts.gatewayPort = Number(port);
    } else if (arg === "--port") {
      opts.listenPort = Number(argv[++i]);
    }
  }
  return opts;
}

const isMain = process.argv[1] && fileURLToPath(import.meta.url) === path.resolve(process.argv[1]);
if (isMain) {
  const opts = parseArgs(process.argv.slice(2));
  const here = path.dirname(fileURLToPath(import.meta.url));
  opts.staticDirs = [path.resolve(here, "../public"), path.resolve(here)];
  const bridge = new Bridge(opts);
  void bridge.start().then((port) => {
    console.log(`cockpit: http://127.0.0.1:${port}/  (gateway ${opts.gatewayHost}:${opts.gatewayPort})`);
  });
  process.on("SIGINT", () => {
    bridge.stop();
    process.exit(0);
  });
  process.on("SIGTERM", () => {
    bridge.stop();
    process.exit(0);
  });
}
