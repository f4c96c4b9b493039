/**
 * Newline-delimited JSON client for the mask service over TCP.
 *
 * The protocol answers requests in order per connection, so a FIFO of
 * pending resolvers is all the correlation needed. All legality questions
 * (which tokens are allowed, whether a decode is finished) go over the wire;
 * the adapter never re-implements constraint logic.
 */

import { spawn, type ChildProcess } from "node:child_process";
import { createInterface } from "node:readline";
import * as net from "node:net";

import { ServiceError, ServiceUnreachable } from "./errors.js";

type Pending = {
  resolve: (reply: Record<string, unknown>) => void;
  reject: (error: Error) => void;
};

export class MaskClient {
  private buffer = "";
  private readonly pending: Pending[] = [];

  private constructor(private readonly socket: net.Socket) {
    socket.on("data", (chunk) => this.onData(chunk.toString("utf-8")));
    socket.on("error", (error) => this.failAll(error));
    socket.on("close", () => this.failAll(new Error("connection closed")));
  }

  static connect(host: string, port: number): Promise<MaskClient> {
    return new Promise((resolve, reject) => {
      const socket = net.createConnection({ host, port }, () =>
        resolve(new MaskClient(socket)),
      );
      socket.once("error", (error) =>
        reject(new ServiceUnreachable(`cannot reach ${host}:${port}: ${error.message}`)),
      );
    });
  }

  private onData(text: string): void {
    this.buffer += text;
    for (;;) {
      const newline = this.buffer.indexOf("\n");
      if (newline < 0) {
        return;
      }
      const line = this.buffer.slice(0, newline);
      this.buffer = this.buffer.slice(newline + 1);
      const waiter = this.pending.shift();
      if (waiter) {
        waiter.resolve(JSON.parse(line));
      }
    }
  }

  private failAll(error: Error): void {
    while (this.pending.length) {
      this.pending.shift()!.reject(error);
    }
  }

  private request(body: Record<string, unknown>): Promise<Record<string, unknown>> {
    return new Promise((resolve, reject) => {
      this.pending.push({ resolve, reject });
      this.socket.write(JSON.stringify(body) + "\n");
    });
  }

  private async call(body: Record<string, unknown>): Promise<Record<string, unknown>> {
    const reply = await this.request(body);
    if (typeof reply.error === "string") {
      throw new ServiceError(reply.error);
    }
    return reply;
  }

  async open(target: string): Promise<number> {
    const reply = await this.call({ op: "open", target });
    return reply.session as number;
  }

  async mask(session: number): Promise<number[]> {
    const reply = await this.call({ op: "mask", session });
    return reply.allowed as number[];
  }

  async advance(session: number, token: number): Promise<boolean> {
    const reply = await this.call({ op: "advance", session, token });
    return reply.done as boolean;
  }

  async close(session: number): Promise<void> {
    await this.call({ op: "close", session });
  }

  end(): void {
    this.socket.end();
    this.socket.destroy();
  }
}

export interface RunningService {
  host: string;
  port: number;
  stop: () => void;
  process: ChildProcess;
}

/**
 * Spawn `vgmd mask-serve --listen tcp:0` and wait for its listening banner.
 */
export function startService(
  vocabPath: string,
  python = process.env.VGMD_PYTHON ?? "python3",
): Promise<RunningService> {
  return new Promise((resolve, reject) => {
    const child = spawn(python, [
      "-m", "vgmd.cli", "mask-serve", "--vocab", vocabPath, "--listen", "tcp:0",
    ]);
    const fail = (message: string) => reject(new ServiceUnreachable(message));
    child.once("error", (error) => fail(`cannot spawn service: ${error.message}`));
    child.once("exit", (code) => fail(`service exited early with code ${code}`));
    const lines = createInterface({ input: child.stdout! });
    lines.once("line", (line) => {
      child.removeAllListeners("exit");
      try {
        const banner = JSON.parse(line);
        resolve({
          host: banner.host as string,
          port: banner.port as number,
          process: child,
          stop: () => child.kill(),
        });
      } catch {
        fail(`unexpected service banner: ${line}`);
      }
    });
  });
}
