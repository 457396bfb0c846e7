"""
Ingestão de Fluxos de Eventos de Interação (CSV -> EventStream).

Responsabilidades:
1. Representar o conjunto de observações O = {(t_m, i_m, j_m)} em [0, T].
2. Validar o fluxo: tempos em [0, T), sem auto-laços, ordenado por tempo e,
   no modo não-direcionado, com cada evento canonizado como i < j.
3. Ler arquivos CSV (`time,sender,receiver`) com pandas, reportando a linha
   exata de qualquer registro malformado.
4. Ler o arquivo JSON auxiliar (`{"n", "T", "directed"}`) que fixa metadados.
5. Agregar contagens por díade em células diádicas regulares de [0, T],
   usadas pela inicialização por k-means.
"""

import io
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

# --- Constantes do Formato ---
CSV_COLUMNS = ['time', 'sender', 'receiver']
MAX_AGGREGATION_DEPTH = 30
# Limite de segurança para o tensor denso de contagens (n * n * 2^d)
MAX_DENSE_CELLS = 50_000_000


class EventFormatError(ValueError):
    """Erro de formato em um arquivo de eventos, com a linha de origem (1-based)."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"Linha {line_number}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class EventStream:
    """
    Fluxo imutável de eventos de interação.

    Os índices de nós são 0-based internamente (os arquivos usam 1-based).
    Use `EventStream.from_arrays` para construir um fluxo canonizado.
    """
    n: int
    T: float
    directed: bool
    times: np.ndarray
    senders: np.ndarray
    receivers: np.ndarray

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"O número de nós deve ser >= 2 (recebido {self.n}).")
        if not self.T > 0:
            raise ValueError(f"O horizonte T deve ser positivo (recebido {self.T}).")
        m = len(self.times)
        if len(self.senders) != m or len(self.receivers) != m:
            raise ValueError("Os vetores de tempos, emissores e receptores devem ter o mesmo tamanho.")
        if m == 0:
            return
        if np.any(self.times < 0) or np.any(self.times >= self.T):
            raise ValueError("Todos os tempos de evento devem pertencer a [0, T).")
        if np.any(np.diff(self.times) < 0):
            raise ValueError("Os eventos devem estar ordenados por tempo.")
        if np.any(self.senders == self.receivers):
            raise ValueError("Auto-laços (i == j) não são permitidos.")
        low = min(self.senders.min(), self.receivers.min())
        high = max(self.senders.max(), self.receivers.max())
        if low < 0 or high >= self.n:
            raise ValueError(f"Índices de nós fora do intervalo [0, {self.n}).")
        if not self.directed and np.any(self.senders > self.receivers):
            raise ValueError("No modo não-direcionado cada evento deve ser armazenado com i < j.")

    @classmethod
    def from_arrays(
        cls,
        times,
        senders,
        receivers,
        n: int,
        T: float,
        directed: bool,
    ) -> "EventStream":
        """Canoniza (i < j se não-direcionado), ordena de forma estável e valida."""
        times = np.asarray(times, dtype=float).reshape(-1)
        senders = np.asarray(senders, dtype=np.int64).reshape(-1)
        receivers = np.asarray(receivers, dtype=np.int64).reshape(-1)
        if not directed:
            senders, receivers = np.minimum(senders, receivers), np.maximum(senders, receivers)
        # Empates de tempo preservam a ordem de entrada
        order = np.argsort(times, kind='stable')
        return cls(
            n=int(n),
            T=float(T),
            directed=bool(directed),
            times=times[order],
            senders=senders[order],
            receivers=receivers[order],
        )

    @property
    def n_events(self) -> int:
        return len(self.times)

    @property
    def n_dyads(self) -> int:
        """Número r de díades: n(n-1) direcionado, n(n-1)/2 não-direcionado."""
        r = self.n * (self.n - 1)
        return r if self.directed else r // 2

    def dyad_totals(self) -> np.ndarray:
        """Matriz n x n com N_ij(T); simétrica no modo não-direcionado."""
        totals = np.zeros((self.n, self.n))
        np.add.at(totals, (self.senders, self.receivers), 1.0)
        if not self.directed:
            totals = totals + totals.T
        return totals

    def cell_index(self, depth: int) -> np.ndarray:
        """Índice da célula semiaberta [a, b) de profundidade `depth` de cada evento."""
        n_cells = 2 ** depth
        idx = np.floor(self.times * n_cells / self.T).astype(np.int64)
        return np.clip(idx, 0, n_cells - 1)


def _read_metadata(meta_path: Optional[Path]) -> dict:
    if meta_path is None or not Path(meta_path).exists():
        return {}
    with open(meta_path, 'r', encoding='utf-8') as f:
        meta = json.load(f)
    logging.info(f"Metadados carregados de {meta_path}: {meta}")
    return meta


def parse_event_csv(
    text: Union[str, io.TextIOBase],
    directed: bool,
    n: Optional[int] = None,
    T: Optional[float] = None,
) -> EventStream:
    """
    Lê um CSV `time,sender,receiver` e devolve um EventStream validado.

    `n` é inferido como o maior id de nó e `T` como o próximo float acima do
    maior tempo, a menos que sejam informados.
    """
    stream = io.StringIO(text) if isinstance(text, str) else text
    try:
        df = pd.read_csv(stream, dtype=str, skipinitialspace=True, skip_blank_lines=False)
    except pd.errors.EmptyDataError:
        raise EventFormatError("Arquivo de eventos vazio.")
    except pd.errors.ParserError as e:
        raise EventFormatError(f"Não foi possível interpretar o CSV: {e}")

    columns = [c.strip().lower() for c in df.columns]
    if columns != CSV_COLUMNS:
        raise EventFormatError(f"Cabeçalho esperado {','.join(CSV_COLUMNS)}, recebido {','.join(columns)}.", 1)
    df.columns = CSV_COLUMNS
    # Linhas em branco no fim do arquivo são ignoradas; no meio, são registros malformados
    filled = np.flatnonzero(df.notna().any(axis=1).to_numpy())
    df = df.iloc[: filled[-1] + 1] if len(filled) else df.iloc[:0]
    if df.empty:
        if n is None or T is None:
            raise EventFormatError("Arquivo de eventos vazio.")
        # Só cabeçalho, com metadados fixados: fluxo sem eventos
        return EventStream.from_arrays([], [], [], n=n, T=T, directed=directed)

    # Valores inválidos viram NaN; a primeira ocorrência define a linha do erro
    times = pd.to_numeric(df['time'], errors='coerce')
    senders = pd.to_numeric(df['sender'], errors='coerce')
    receivers = pd.to_numeric(df['receiver'], errors='coerce')

    # Posição + 2 é a linha física (cabeçalho na linha 1)
    for pos in range(len(df)):
        line = pos + 2
        t, i, j = times.iat[pos], senders.iat[pos], receivers.iat[pos]
        if pd.isna(t) or pd.isna(i) or pd.isna(j):
            raise EventFormatError(f"Registro malformado: {df.iloc[pos].tolist()}", line)
        if not np.isfinite(t) or t < 0:
            raise EventFormatError(f"Tempo inválido: {t}", line)
        if i != int(i) or j != int(j) or i < 1 or j < 1:
            raise EventFormatError(f"Ids de nós devem ser inteiros positivos: ({i}, {j})", line)
        if i == j:
            raise EventFormatError(f"Auto-laço não permitido no nó {int(i)}", line)
        if T is not None and t >= T:
            raise EventFormatError(f"Tempo {t} fora de [0, T) com T={T}", line)
        if n is not None and max(i, j) > n:
            raise EventFormatError(f"Id de nó {int(max(i, j))} maior que n={n}", line)

    # Conversão exata, bit a bit
    times_arr = np.array([float(value) for value in df['time']], dtype=float)
    senders_arr = senders.to_numpy(dtype=np.int64) - 1
    receivers_arr = receivers.to_numpy(dtype=np.int64) - 1

    if n is None:
        n = int(max(senders_arr.max(), receivers_arr.max())) + 1
    if T is None:
        T = float(np.nextafter(times_arr.max(), np.inf))

    event_stream = EventStream.from_arrays(times_arr, senders_arr, receivers_arr, n=n, T=T, directed=directed)
    logging.info(
        f"Fluxo de eventos lido: M={event_stream.n_events}, n={event_stream.n}, "
        f"T={event_stream.T}, direcionado={event_stream.directed}"
    )
    return event_stream


def load_event_csv(
    path: Path,
    directed: Optional[bool] = None,
    n: Optional[int] = None,
    T: Optional[float] = None,
    meta_path: Optional[Path] = None,
) -> EventStream:
    """
    Carrega um arquivo de eventos do disco. Metadados do JSON auxiliar
    (por padrão `<arquivo>.json`) são usados quando os argumentos são omitidos.
    """
    path = Path(path)
    if meta_path is None:
        meta_path = path.with_suffix('.json')
    meta = _read_metadata(meta_path)
    directed = directed if directed is not None else bool(meta.get('directed', False))
    n = n if n is not None else meta.get('n')
    T = T if T is not None else meta.get('T')
    logging.info(f"Iniciando leitura do arquivo de eventos: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        return parse_event_csv(f, directed=directed, n=n, T=T)


def format_event_csv(stream: EventStream) -> str:
    """Serializa o fluxo como CSV com ids 1-based e tempos em precisão total."""
    df = pd.DataFrame({
        'time': stream.times,
        'sender': stream.senders + 1,
        'receiver': stream.receivers + 1,
    })
    return df.to_csv(index=False, lineterminator='\n')


def write_event_csv(stream: EventStream, path: Path) -> None:
    """Escreve o CSV de eventos e o JSON auxiliar de metadados ao lado."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_event_csv(stream), encoding='utf-8')
    meta = {'n': stream.n, 'T': stream.T, 'directed': stream.directed}
    path.with_suffix('.json').write_text(json.dumps(meta), encoding='utf-8')
    logging.info(f"Escritos {stream.n_events} eventos em {path}")


def aggregate_counts(stream: EventStream, depth: int) -> pd.DataFrame:
    """
    Conta os eventos de cada díade em cada uma das 2^depth células regulares.

    Retorna um DataFrame longo (sender, receiver, cell, count) apenas com as
    combinações não nulas; as demais contagens são zero.
    """
    if not 0 <= depth <= MAX_AGGREGATION_DEPTH:
        raise ValueError(f"A profundidade deve estar em [0, {MAX_AGGREGATION_DEPTH}] (recebido {depth}).")
    df = pd.DataFrame({
        'sender': stream.senders,
        'receiver': stream.receivers,
        'cell': stream.cell_index(depth),
    })
    counts = df.groupby(['sender', 'receiver', 'cell'], as_index=False).size()
    return counts.rename(columns={'size': 'count'})


def dense_counts(stream: EventStream, depth: int) -> np.ndarray:
    """
    Tensor denso n x n x 2^depth de contagens. No modo não-direcionado a
    contagem aparece nas duas orientações (i, j) e (j, i).
    """
    n_cells = 2 ** depth
    if stream.n * stream.n * n_cells > MAX_DENSE_CELLS:
        raise ValueError(f"Tensor de contagens grande demais para profundidade {depth} e n={stream.n}.")
    tensor = np.zeros((stream.n, stream.n, n_cells))
    cells = stream.cell_index(depth)
    np.add.at(tensor, (stream.senders, stream.receivers, cells), 1.0)
    if not stream.directed:
        tensor = tensor + tensor.transpose(1, 0, 2)
    return tensor
