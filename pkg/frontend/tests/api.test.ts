import { describe, expect, it } from 'vitest';

import { ApiClient, ApiError, fetchWithRetry } from '../src/api.js';

interface Recorded {
  url: string;
  init?: RequestInit;
}

function fakeFetch(status: number, body: unknown, recorded: Recorded[] = []) {
  return async (url: string, init?: RequestInit): Promise<Response> => {
    recorded.push({ url, init });
    return new Response(JSON.stringify(body), {
      status,
      headers: { 'Content-Type': 'application/json' },
    });
  };
}

describe('ApiClient', () => {
  it('posts session creation with the JSON body', async () => {
    const recorded: Recorded[] = [];
    const client = new ApiClient('http://svc', null, fakeFetch(200, { id: 's1' }, recorded));
    await client.createSession('0000-0002-1825-0097', 'q');
    expect(recorded[0].url).toBe('http://svc/sessions');
    expect(JSON.parse(recorded[0].init?.body as string)).toEqual({
      orcid: '0000-0002-1825-0097',
      query: 'q',
    });
  });

  it('sends the bearer token when configured', async () => {
    const recorded: Recorded[] = [];
    const client = new ApiClient('http://svc', 'secret', fakeFetch(200, {}, recorded));
    await client.healthz();
    const headers = recorded[0].init?.headers as Record<string, string>;
    expect(headers['Authorization']).toBe('Bearer secret');
  });

  it('surfaces the error envelope as an ApiError', async () => {
    const client = new ApiClient(
      'http://svc',
      null,
      fakeFetch(404, { error: { code: 'NOT_FOUND', message: 'unknown session', details: {} } }),
    );
    await expect(client.getSession('ghost')).rejects.toMatchObject({
      code: 'NOT_FOUND',
      status: 404,
    });
  });

  it('keeps a generic code for non-envelope errors', async () => {
    const raw = async (): Promise<Response> => new Response('boom', { status: 500 });
    const client = new ApiClient('http://svc', null, raw);
    await expect(client.healthz()).rejects.toMatchObject({ code: 'HTTP_ERROR', status: 500 });
  });

  it('serializes advance actions with their parameters', async () => {
    const recorded: Recorded[] = [];
    const client = new ApiClient('http://svc', null, fakeFetch(200, {}, recorded));
    await client.advance('s1', 'ACCEPT', { candidate_id: 4 });
    expect(JSON.parse(recorded[0].init?.body as string)).toEqual({ action: 'ACCEPT', candidate_id: 4 });
  });
});

describe('fetchWithRetry', () => {
  it('retries transient failures with growing delays', async () => {
    const delays: number[] = [];
    let attempts = 0;
    const result = await fetchWithRetry(
      async () => {
        attempts += 1;
        if (attempts < 3) throw new Error('connection refused');
        return 'ok';
      },
      3,
      100,
      async (ms) => {
        delays.push(ms);
      },
    );
    expect(result).toBe('ok');
    expect(delays).toEqual([100, 200]);
  });

  it('does not retry real API errors', async () => {
    let attempts = 0;
    await expect(
      fetchWithRetry(
        async () => {
          attempts += 1;
          throw new ApiError('SESSION_CLOSED', 'closed', 409);
        },
        3,
        1,
        async () => {},
      ),
    ).rejects.toMatchObject({ code: 'SESSION_CLOSED' });
    expect(attempts).toBe(1);
  });
});
