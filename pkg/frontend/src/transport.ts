/**
 * Minimal WebSocket wrapper with an injectable socket so tests can drive a
 * SessionView from a scripted mock service.
 */

import type { ClientMessage, ServerMessage } from "./protocol.js";
import { parseServerMessage } from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((event: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onopen: (() => void) | null;
}

export interface TransportHandlers {
  onMessage: (msg: ServerMessage) => void;
  onClose?: () => void;
  onOpen?: () => void;
  onProtocolError?: (error: Error, raw: string) => void;
}

export class Connection {
  private socket: SocketLike;

  constructor(socket: SocketLike, handlers: TransportHandlers) {
    this.socket = socket;
    socket.onmessage = (event) => {
      let msg: ServerMessage;
      try {
        msg = parseServerMessage(JSON.parse(event.data));
      } catch (err) {
        handlers.onProtocolError?.(err as Error, event.data);
        return;
      }
      handlers.onMessage(msg);
    };
    socket.onclose = () => handlers.onClose?.();
    socket.onopen = () => handlers.onOpen?.();
  }

  send(msg: ClientMessage): void {
    this.socket.send(JSON.stringify(msg));
  }

  close(): void {
    this.socket.close();
  }
}

export function connectWebSocket(url: string, handlers: TransportHandlers): Connection {
  return new Connection(new WebSocket(url) as unknown as SocketLike, handlers);
}
