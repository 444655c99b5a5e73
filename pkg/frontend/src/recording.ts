/** HTTP exchange capture: a fetch wrapper that records every request and
 * response passing between the studio and the service, in a JSON shape
 * the test suite can replay offline. */

import type { FetchLike } from "./api.js";
import { bytesToBase64 } from "./png.js";

export interface RecordedExchange {
  method: string;
  /** Path plus query string, e.g. "/events?after=0&timeout=0". */
  path: string;
  requestBody?: unknown;
  idempotencyKey?: string;
  status: number;
  contentType: string;
  responseJson?: unknown;
  /** Base64 body for binary responses (PNG artifacts, sketches). */
  responseB64?: string;
  /** Raw text for non-JSON text responses (the NDJSON event feed). */
  responseText?: string;
}

export interface ServiceRecording {
  description: string;
  exchanges: RecordedExchange[];
}

function headerValue(
  headers: RequestInit["headers"],
  name: string,
): string | undefined {
  if (!headers) return undefined;
  const lower = name.toLowerCase();
  if (headers instanceof Headers) return headers.get(lower) ?? undefined;
  if (Array.isArray(headers)) {
    const hit = headers.find(([key]) => key.toLowerCase() === lower);
    return hit?.[1];
  }
  for (const [key, value] of Object.entries(headers)) {
    if (key.toLowerCase() === lower) return value;
  }
  return undefined;
}

export function pathOf(url: string): string {
  const parsed = new URL(url);
  return parsed.pathname + parsed.search;
}

/** Wrap a real fetch so each exchange is appended to `exchanges` while
 * the caller sees an untouched Response. */
export function makeRecordingFetch(
  realFetch: FetchLike,
  exchanges: RecordedExchange[],
): FetchLike {
  return async (url, init) => {
    const method = (init?.method ?? "GET").toUpperCase();
    const exchange: RecordedExchange = {
      method,
      path: pathOf(url),
      status: 0,
      contentType: "",
    };
    if (typeof init?.body === "string") {
      exchange.requestBody = JSON.parse(init.body);
    }
    const idempotencyKey = headerValue(init?.headers, "Idempotency-Key");
    if (idempotencyKey !== undefined) exchange.idempotencyKey = idempotencyKey;

    const response = await realFetch(url, init);
    exchange.status = response.status;
    exchange.contentType = response.headers.get("content-type") ?? "";
    const bytes = new Uint8Array(await response.arrayBuffer());
    if (exchange.contentType.includes("application/json")) {
      exchange.responseJson = JSON.parse(new TextDecoder().decode(bytes));
    } else if (
      exchange.contentType.includes("ndjson") ||
      exchange.contentType.startsWith("text/")
    ) {
      exchange.responseText = new TextDecoder().decode(bytes);
    } else {
      exchange.responseB64 = bytesToBase64(bytes);
    }
    exchanges.push(exchange);
    return new Response(bytes.slice(), {
      status: response.status,
      headers: { "content-type": exchange.contentType },
    });
  };
}
