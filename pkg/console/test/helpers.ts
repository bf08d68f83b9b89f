// Canned-fetch helpers for unit tests (node environment, no jsdom).

export interface RecordedRequest {
  url: string;
  method: string;
  body: unknown;
}

export type Handler = (request: RecordedRequest) => { status?: number; body: unknown };

export function makeFetch(handlers: Record<string, Handler>) {
  const requests: RecordedRequest[] = [];
  const fetchImpl = async (input: string, init?: RequestInit): Promise<Response> => {
    const url = new URL(input);
    const recorded: RecordedRequest = {
      url: url.pathname,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(String(init.body)) : null,
    };
    requests.push(recorded);
    const handler = handlers[`${recorded.method} ${url.pathname}`];
    if (!handler) {
      return new Response(
        JSON.stringify({ code: "NOT_FOUND", stage: null, message: url.pathname }),
        { status: 404, headers: { "Content-Type": "application/json" } },
      );
    }
    const { status = 200, body } = handler(recorded);
    return new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { fetchImpl, requests };
}

/** A fetch whose responses resolve only when released, for ordering tests. */
export function makeDeferredFetch() {
  const pending: { release: (body: unknown) => void }[] = [];
  const fetchImpl = (_input: string, _init?: RequestInit): Promise<Response> =>
    new Promise((resolve) => {
      pending.push({
        release: (body) =>
          resolve(
            new Response(JSON.stringify(body), {
              status: 200,
              headers: { "Content-Type": "application/json" },
            }),
          ),
      });
    });
  return { fetchImpl, pending };
}
