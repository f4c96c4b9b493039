import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { MaskClient, startService, type RunningService } from "../src/client.js";
import { ServiceError, ServiceUnreachable } from "../src/errors.js";

const VOCAB = fileURLToPath(new URL("../fixtures/marker_eager_vocab.json", import.meta.url));

let service: RunningService;

beforeAll(async () => {
  service = await startService(VOCAB);
}, 30_000);

afterAll(() => {
  service?.stop();
});

describe("mask client", () => {
  it("walks a session over the wire", async () => {
    const client = await MaskClient.connect(service.host, service.port);
    try {
      const session = await client.open("a");
      expect(await client.mask(session)).toEqual([0, 2]);
      expect(await client.advance(session, 2)).toBe(false);
      expect(await client.mask(session)).toEqual([5]);
      expect(await client.advance(session, 5)).toBe(true);
      await client.close(session);
    } finally {
      client.end();
    }
  });

  it("surfaces protocol errors with their code", async () => {
    const client = await MaskClient.connect(service.host, service.port);
    try {
      const session = await client.open("a");
      await expect(client.advance(session, 1)).rejects.toMatchObject({
        code: "DisallowedToken",
      });
      // session still usable after a refused token
      expect(await client.mask(session)).toEqual([0, 2]);
      await expect(client.open("a >> b")).rejects.toMatchObject({
        code: "MarkerCollision",
      });
      await expect(client.mask(9999)).rejects.toMatchObject({
        code: "UnknownSession",
      });
    } finally {
      client.end();
    }
  });

  it("interleaves independent sessions on one connection", async () => {
    const client = await MaskClient.connect(service.host, service.port);
    try {
      const first = await client.open("a");
      const second = await client.open("b");
      expect(await client.mask(first)).toEqual([0, 2]);
      expect(await client.mask(second)).toEqual([0, 4]);
      await client.advance(first, 2);
      expect(await client.mask(second)).toEqual([0, 4]); // untouched
    } finally {
      client.end();
    }
  });

  it("rejects unreachable endpoints", async () => {
    await expect(MaskClient.connect("127.0.0.1", 1)).rejects.toBeInstanceOf(
      ServiceUnreachable,
    );
  });

  it("rejects a spawn that cannot start", async () => {
    await expect(startService(VOCAB, "definitely-not-a-python"))
      .rejects.toBeInstanceOf(ServiceUnreachable);
  });

  it("propagates ServiceError subclassing", async () => {
    const client = await MaskClient.connect(service.host, service.port);
    try {
      const session = await client.open("a");
      const failure = await client.advance(session, 1).catch((e) => e);
      expect(failure).toBeInstanceOf(ServiceError);
    } finally {
      client.end();
    }
  });
});
